"""
RunConfig：一次訓練的所有可調參數。

設定檔是扁平的 `key = value` 文字（可用 `#` 註解），以 python-dotenv 的 parser 讀取，
命令列參數再覆蓋檔案中的值。
"""
import hashlib
import io
from pathlib import Path
from typing import Literal

from dotenv.parser import parse_stream
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from concepts.models import Verb
from concepts.splits import SplitKind
from speaker.models import SpeakerKind


class ConfigInvalid(ValueError):
    """errors 為 (key, 訊息, 行號或 None) 的列表"""

    def __init__(self, errors: list):
        self.errors = errors
        lines = []
        for key, message, line in errors:
            location = f"第 {line} 行 " if line else ""
            lines.append(f"{location}{key}: {message}")
        super().__init__('設定錯誤：\n  ' + '\n  '.join(lines))


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid', frozen=True, use_enum_values=True)

    seed: int = Field(default=0, ge=0, description="亂數種子，整個訓練只由 config 與 seed 決定")
    split: SplitKind = Field(default=SplitKind.NONE, description="zero-shot 切分：none / visual / numeral")
    speaker: SpeakerKind = Field(default=SpeakerKind.LEARNED, description="learned / perfect / none")
    oracle_listener: bool = Field(default=False, description="listener 額外看到 target 平面")
    task: Literal['all', 'walk', 'push', 'pull'] = Field(default='all', description="只訓練某個動詞")

    n_m: int = Field(default=5, ge=1, le=16)
    d_m: int = Field(default=4, ge=2, le=64)
    d_h: int = Field(default=64, ge=1, le=1024)
    d_g: int = Field(default=32, ge=1, le=1024)

    lambda1: float = Field(default=0.1, ge=0.0, description="coverage reward 權重")
    lambda3: float = Field(default=0.05, ge=0.0, description="influence reward 權重")
    k: int = Field(default=5, ge=1, le=10_000, description="pseudo message 數量")
    use_coverage: bool = True
    use_influence: bool = True
    env_reward: bool = Field(default=True, description="false 時只用 intrinsic reward 訓練")

    gamma: float = Field(default=0.95, gt=0.0, le=1.0, description="回報折扣")
    t_max: int = Field(default=30, ge=1, le=1000)
    batch_size: int = Field(default=8, ge=1)
    lr_speaker: float = Field(default=1e-3, gt=0.0)
    lr_listener: float = Field(default=1e-3, gt=0.0)
    lr_discriminator: float = Field(default=1e-3, gt=0.0)
    baseline_beta: float = Field(default=0.9, ge=0.0, lt=1.0, description="REINFORCE baseline 的 EMA 係數")

    curriculum_beta: float = Field(default=0.9, ge=0.0, lt=1.0)
    curriculum_eps_mix: float = Field(default=0.2, ge=0.0, le=1.0)
    eval_every: int = Field(default=100, ge=1)
    heldout_episodes: int = Field(default=20, ge=1)

    buffer_capacity: int = Field(default=10_000, ge=1)
    disc_every: int = Field(default=50, ge=1)
    disc_batches: int = Field(default=10, ge=0)
    disc_batch_size: int = Field(default=64, ge=1)

    episodes: int = Field(default=50_000, ge=0)
    checkpoint_every: int = Field(default=5_000, ge=1)
    output_dir: str = Field(default='runs/default', min_length=1)

    @model_validator(mode='after')
    def check_combinations(self):
        if self.speaker == SpeakerKind.PERFECT and (self.n_m != 5 or self.d_m < 4):
            raise ValueError("speaker = perfect 需要 n_m = 5 且 d_m ≥ 4")
        if self.oracle_listener and self.speaker != SpeakerKind.NONE:
            raise ValueError("oracle_listener 只能搭配 speaker = none")
        return self

    @property
    def task_verb(self):
        return None if self.task == 'all' else Verb(self.task)

    @property
    def intrinsic_enabled(self) -> bool:
        return self.speaker == SpeakerKind.LEARNED and (self.use_coverage or self.use_influence)


CONFIG_KEYS = tuple(RunConfig.model_fields)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def format_config(config: RunConfig) -> str:
    """依欄位順序輸出 `key = value`，再讀回會得到相同的 RunConfig"""
    return ''.join(f'{key} = {_format_value(getattr(config, key))}\n' for key in CONFIG_KEYS)


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(format_config(config).encode('utf-8')).hexdigest()


def parse_config_text(text: str) -> tuple:
    """回傳 ({key: 字串值}, {key: 行號})"""
    values, lines, errors = {}, {}, []
    for binding in parse_stream(io.StringIO(text)):
        line = binding.original.line
        if binding.error:
            errors.append(('?', f"無法解析：{binding.original.string.strip()!r}", line))
            continue
        if binding.key is None:
            continue
        if binding.key not in CONFIG_KEYS:
            errors.append((binding.key, "未知的設定鍵", line))
            continue
        if binding.value is None:
            errors.append((binding.key, "缺少值", line))
            continue
        values[binding.key] = binding.value.strip()
        lines[binding.key] = line
    if errors:
        raise ConfigInvalid(errors)
    return values, lines


def build_config(values: dict, lines: dict | None = None) -> RunConfig:
    lines = lines or {}
    unknown = [key for key in values if key not in CONFIG_KEYS]
    if unknown:
        raise ConfigInvalid([(key, "未知的設定鍵", lines.get(key)) for key in unknown])
    try:
        return RunConfig(**values)
    except ValidationError as e:
        errors = []
        for error in e.errors():
            key = str(error['loc'][0]) if error['loc'] else '(config)'
            errors.append((key, error['msg'], lines.get(key)))
        raise ConfigInvalid(errors) from e


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """讀取設定檔（可省略）並套用覆蓋值；覆蓋值為 None 的鍵會被忽略"""
    values, lines = {}, {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigInvalid([('config', f"找不到設定檔 {path}", None)])
        values, lines = parse_config_text(path.read_text(encoding='utf-8'))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        values[key] = value
        lines.pop(key, None)
    return build_config(values, lines)


def load_config_text(text: str) -> RunConfig:
    return build_config(*parse_config_text(text))
