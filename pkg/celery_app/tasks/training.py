import logging
import math
import traceback
from CommLab.celery import app
from trainer.config import load_config_text
from trainer.loop import train
from trainer.models import TrainingRun, RunStatusChoices

logger = logging.getLogger(__name__)


def run_training(run: TrainingRun, progress=None) -> dict:
    """依 TrainingRun 上的 config 執行訓練，狀態與錯誤堆疊寫回資料庫"""
    run.mark(RunStatusChoices.PROCESSING)

    def record_progress(snapshot):
        TrainingRun.objects.filter(id=run.id).update(episodes_done=snapshot.episode)
        if progress is not None:
            progress(snapshot)

    try:
        config = load_config_text(run.config_text)
        result = train(config, progress=record_progress)
    except Exception as e:
        error_traceback = traceback.format_exc()
        logger.error(f"訓練 #{run.id} 失敗：{e}")
        run.mark(RunStatusChoices.FAILED, traceback=error_traceback)
        return {
            'status': 'error',
            'error': str(e),
            'run_id': run.id,
            'traceback': error_traceback,
        }

    run.mark(
        RunStatusChoices.COMPLETED,
        episodes_done=result.episodes,
        final_heldout=result.final.heldout,
        final_topsim=None if math.isnan(result.final.topsim) else result.final.topsim,
        traceback=None,
    )
    return {
        'status': 'completed',
        'run_id': run.id,
        'metrics_path': str(result.metrics_path),
        'checkpoint_path': str(result.checkpoint_path),
    }


@app.task()
def train_async(run_id):
    try:
        run = TrainingRun.objects.get(id=run_id)
    except TrainingRun.DoesNotExist:
        logger.error(f"找不到 TrainingRun #{run_id}")
        return {'status': 'error', 'error': f'TrainingRun {run_id} 不存在'}
    return run_training(run)
