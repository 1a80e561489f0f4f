from dataclasses import dataclass

import numpy as np

from concepts.models import Concept
from diffcore.checkpoint import Checkpoint, CorruptCheckpoint
from diffcore.store import ParamStore
from intrinsic.discriminator import init_discriminator
from listener.network import init_listener
from speaker.language import language_table, perfect_language_table, perfect_speak
from speaker.models import ChannelConfig, SpeakerKind, silent_bits
from speaker.network import init_speaker, speak
from trainer.config import RunConfig, load_config_text


@dataclass
class AgentSet:
    """一次實驗中 speaker / listener / discriminator 的參數，以及訊息通道設定"""
    speaker_kind: SpeakerKind
    channel: ChannelConfig
    listener: ParamStore
    oracle: bool = False
    speaker: ParamStore | None = None
    discriminator: ParamStore | None = None

    def stores(self) -> dict:
        stores = {'listener': self.listener}
        if self.speaker is not None:
            stores['speaker'] = self.speaker
        if self.discriminator is not None:
            stores['discriminator'] = self.discriminator
        return stores

    def message_for(self, concept: Concept, rng: np.random.Generator, mode: str) -> tuple:
        """回傳 (Message 或 None, speaker log-probs 或 None, listener 收到的 bits)"""
        if self.speaker_kind == SpeakerKind.LEARNED:
            message, log_probs = speak(concept, self.speaker, rng, self.channel, mode)
            return message, log_probs, message.bits()
        if self.speaker_kind == SpeakerKind.PERFECT:
            message = perfect_speak(concept, self.channel.d_m)
            return message, None, message.bits()
        return None, None, silent_bits(self.channel)


def build_agents(config: RunConfig, rng: np.random.Generator) -> AgentSet:
    channel = ChannelConfig(n_m=config.n_m, d_m=config.d_m)
    speaker_kind = SpeakerKind(config.speaker)
    agents = AgentSet(
        speaker_kind=speaker_kind,
        channel=channel,
        oracle=config.oracle_listener,
        listener=init_listener(rng, channel.width, oracle=config.oracle_listener, d_g=config.d_g, d_h=config.d_h),
    )
    if speaker_kind == SpeakerKind.LEARNED:
        agents.speaker = init_speaker(rng, channel, d_h=config.d_h)
        agents.discriminator = init_discriminator(rng, channel.width, d_h=config.d_h)
    return agents


def agents_from_checkpoint(checkpoint: Checkpoint) -> tuple:
    """由 checkpoint 還原 (RunConfig, AgentSet)"""
    config = load_config_text(checkpoint.config_text)
    agents = build_agents(config, np.random.default_rng(config.seed))
    for name, store in agents.stores().items():
        restored = checkpoint.stores.get(name)
        if restored is None:
            raise CorruptCheckpoint(f"checkpoint 缺少 {name} 的參數")
        if restored.keys() != store.keys():
            raise CorruptCheckpoint(f"{name} 的參數名稱與 config 不符")
        for key in store.keys():
            if restored[key].shape != store[key].shape:
                raise CorruptCheckpoint(f"{name}.{key} shape {restored[key].shape} 與 config 不符")
    agents.listener = checkpoint.stores['listener']
    agents.speaker = checkpoint.stores.get('speaker')
    agents.discriminator = checkpoint.stores.get('discriminator')
    return config, agents


def agent_language_table(agents: AgentSet) -> dict | None:
    """目前 speaker 的 concept → message 對照表；沒有 speaker 時為 None"""
    if agents.speaker_kind == SpeakerKind.LEARNED:
        return language_table(agents.speaker, agents.channel)
    if agents.speaker_kind == SpeakerKind.PERFECT:
        return perfect_language_table(agents.channel.d_m)
    return None
