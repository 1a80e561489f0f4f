import logging
from pathlib import Path

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd

from diffcore.checkpoint import MissingArtifact

logger = logging.getLogger(__name__)

EPISODES_PER_UNIT = 50


def load_metrics(path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise MissingArtifact(f"找不到 metrics CSV：{path}")
    frame = pd.read_csv(path)
    missing = {'episode', 'topsim'} - set(frame.columns)
    if missing or not any(column.startswith('heldout_success_') for column in frame.columns):
        raise ValueError(f"{path} 不是 metrics CSV（缺少欄位 {sorted(missing) or 'heldout_success_*'}）")
    return frame


def heldout_curve(frame: pd.DataFrame) -> pd.Series:
    """各訓練 task class held-out 成功率的平均"""
    columns = [column for column in frame.columns if column.startswith('heldout_success_')]
    return frame[columns].mean(axis=1)


def plot_curves(paths, output, labels=None, window: int = 200) -> Path:
    """
    左圖：held-out 成功率與訓練成功率的移動平均；右圖：topsim。
    x 軸單位為 50 回合。
    """
    labels = labels or [Path(path).parent.name or Path(path).stem for path in paths]
    if len(labels) != len(paths):
        raise ValueError(f"labels 數量 {len(labels)} 與 CSV 數量 {len(paths)} 不符")

    fig, axes = plt.subplots(1, 2, figsize=(12, 4.5))
    for path, label in zip(paths, labels):
        frame = load_metrics(path)
        x = frame['episode'] / EPISODES_PER_UNIT

        line, = axes[0].plot(x, heldout_curve(frame), linewidth=2, label=f'{label} (held-out)')
        rolling = frame['success'].rolling(window, min_periods=1).mean()
        axes[0].plot(x, rolling, alpha=0.4, color=line.get_color(), linestyle='--')

        if frame['topsim'].notna().any():
            axes[1].plot(x, frame['topsim'], linewidth=2, label=label)

    axes[0].set_xlabel(f'Episodes (1 unit = {EPISODES_PER_UNIT})')
    axes[0].set_ylabel('Success rate')
    axes[0].set_ylim(-0.02, 1.02)
    axes[0].set_title('Task success')
    axes[0].legend()
    axes[0].grid(True, alpha=0.3)

    axes[1].set_xlabel(f'Episodes (1 unit = {EPISODES_PER_UNIT})')
    axes[1].set_ylabel('topsim')
    axes[1].set_ylim(-1.02, 1.02)
    axes[1].set_title('Topographic similarity')
    if axes[1].lines:
        axes[1].legend()
    axes[1].grid(True, alpha=0.3)

    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    plt.tight_layout()
    plt.savefig(output, dpi=150, bbox_inches='tight')
    plt.close(fig)
    logger.info(f"圖表已輸出至 {output}")
    return output
