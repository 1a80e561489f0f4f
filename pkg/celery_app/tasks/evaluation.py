"""
把每個 task class 的評估分派給 evaluation_queue 上的 worker。

參數以 checkpoint bytes（base64）傳遞；每個 task class 的 rng 由 (seed, task class) 推導，
結果依呼叫端給的順序合併，與 worker 完成的先後無關。
"""
import base64
import logging
from celery import group
from CommLab.celery import app
from concepts.splits import make_split
from diffcore.checkpoint import deserialize_checkpoint, serialize_checkpoint
from trainer.agents import agents_from_checkpoint
from trainer.evaluation import TaskAccuracy, evaluate_task_class

logger = logging.getLogger(__name__)


def encode_agents(agents, config_text: str) -> str:
    return base64.b64encode(serialize_checkpoint(config_text, agents.stores())).decode('ascii')


@app.task()
def evaluate_task_class_async(payload, split_kind, task_class, episodes, seed, mode, t_max):
    _, agents = agents_from_checkpoint(deserialize_checkpoint(base64.b64decode(payload)))
    result = evaluate_task_class(agents, make_split(split_kind), task_class, episodes, seed, mode=mode, t_max=t_max)
    return {'task_class': result.task_class, 'successes': result.successes, 'episodes': result.episodes}


def dispatch_heldout(agents, config_text, split_kind, task_classes, episodes, seed, mode, t_max) -> list:
    payload = encode_agents(agents, config_text)
    job = group(
        evaluate_task_class_async.s(payload, str(split_kind), task_class, episodes, seed, str(mode), t_max)
        for task_class in task_classes
    )
    # 訓練本身也可能在 worker 裡執行，因此允許同步等待子任務
    results = job.apply_async().get(disable_sync_subtasks=False)
    logger.debug(f"Celery held-out 評估完成：{len(results)} 個 task class")
    return [TaskAccuracy(**result) for result in results]
