"""
management commands 共用的錯誤轉換與 checkpoint 載入。

exit code：0 成功、1 用法或設定錯誤、2 驗證失敗、3 artifact 不存在或損毀、4 訓練過程中發生錯誤。
"""
import sys

from django.core.management.base import BaseCommand, CommandError

from diffcore.checkpoint import CorruptCheckpoint, MissingArtifact, load_checkpoint
from trainer.agents import agents_from_checkpoint
from trainer.config import ConfigInvalid

EXIT_USAGE = 1
EXIT_VERIFICATION = 2
EXIT_ARTIFACT = 3
EXIT_TRAINING = 4


def usage_error(message) -> CommandError:
    return CommandError(str(message), returncode=EXIT_USAGE)


def artifact_error(message) -> CommandError:
    return CommandError(str(message), returncode=EXIT_ARTIFACT)


def training_error(message) -> CommandError:
    return CommandError(str(message), returncode=EXIT_TRAINING)


def parse_assignments(items) -> dict:
    """`--set key=value` 可重複出現，後面的覆蓋前面的"""
    values = {}
    for item in items or []:
        key, separator, value = item.partition('=')
        if not separator or not key.strip():
            raise usage_error(f"--set 需要 key=value 格式，收到 {item!r}")
        values[key.strip()] = value.strip()
    return values


def open_checkpoint(path) -> tuple:
    """回傳 (RunConfig, AgentSet)；檔案不存在或損毀時轉成 exit code 3"""
    try:
        return agents_from_checkpoint(load_checkpoint(path))
    except (MissingArtifact, CorruptCheckpoint) as e:
        raise artifact_error(e) from e
    except ConfigInvalid as e:
        raise artifact_error(f"checkpoint 內的 config 無法解析：{e}") from e


class LabCommand(BaseCommand):
    """argparse 的用法錯誤在命令列下以 exit code 1 結束"""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        default_error = parser.error

        def error(message):
            if parser.called_from_command_line:
                parser.print_usage(sys.stderr)
                parser.exit(EXIT_USAGE, f"{parser.prog}: error: {message}\n")
            default_error(message)

        parser.error = error
        return parser
