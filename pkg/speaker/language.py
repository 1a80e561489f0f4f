from collections import Counter

from concepts.encoding import slot_indices
from concepts.models import Concept, all_concepts, SLOT_CARDINALITIES
from diffcore.store import ParamStore
from speaker.models import ChannelConfig, ChannelTooNarrow, Message
from speaker.network import batched_argmax_messages

ARROW = '→'


def perfect_speak(concept: Concept, d_m: int = 4) -> Message:
    """第 i 個 symbol 就是 concept 第 i 個欄位的 index（verb, color, size, weight, shape）"""
    if d_m < max(SLOT_CARDINALITIES):
        raise ChannelTooNarrow(f"Perfect Speaker 需要 d_m ≥ {max(SLOT_CARDINALITIES)}，目前 d_m={d_m}")
    return Message(slot_indices(concept), d_m=d_m)


def perfect_language_table(d_m: int = 4) -> dict:
    return {concept: perfect_speak(concept, d_m) for concept in all_concepts()}


def language_table(store: ParamStore, channel: ChannelConfig) -> dict:
    """全部 192 個 concept 以 argmax 解碼得到的 concept → message 對照表"""
    concepts = all_concepts()
    return dict(zip(concepts, batched_argmax_messages(store, concepts, channel)))


def count_collisions(table: dict) -> int:
    """與其他 concept 共用訊息而無法被區分的 concept 數量（0 表示 injective）"""
    counts = Counter(table.values())
    return sum(count - 1 for count in counts.values() if count > 1)


def is_injective(table: dict) -> bool:
    return count_collisions(table) == 0


def format_language_table(table: dict) -> str:
    return ''.join(f'{concept} {ARROW} {message}\n' for concept, message in table.items())


def parse_language_table(text: str, d_m: int) -> dict:
    table = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith('#'):
            continue
        try:
            concept_text, message_text = line.split(ARROW)
            table[Concept.from_string(concept_text.strip())] = Message.from_string(message_text, d_m=d_m)
        except ValueError as e:
            raise ValueError(f"第 {line_number} 行格式錯誤：{line!r}（{e}）") from e
    return table
