from django.conf import settings

from concepts.splits import SplitMode, make_split
from trainer.cli import LabCommand, open_checkpoint, usage_error
from trainer.config import config_hash, format_config
from trainer.evaluation import (
    EmptyTestSet, evaluate_heldout, evaluate_zero_shot, format_report, random_policy_baseline, task_classes_for,
)
from trainer.models import EvaluationReport, TrainingRun


class Command(LabCommand):
    help = '以 argmax 模式評估 checkpoint，每行輸出 `task_class accuracy n`'

    def add_arguments(self, parser):
        parser.add_argument('checkpoint', help='checkpoint.bin 路徑')
        parser.add_argument('--split', choices=['none', 'visual', 'numeral'],
                            help='預設使用 checkpoint 訓練時的 split')
        parser.add_argument('--mode', choices=['test', 'train'], default='test',
                            help='test：zero-shot 評估 test concept；train：訓練 task class 的 held-out 評估')
        parser.add_argument('--episodes', type=int, default=500, help='每個 task class 的回合數（預設 500）')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--random-baseline', action='store_true', help='同時輸出隨機策略的成功率')
        parser.add_argument('--parallel', action='store_true', default=None,
                            help='分派到 Celery evaluation_queue（預設依 HELDOUT_USE_CELERY）')

    def handle(self, *args, **options):
        if options['episodes'] < 1:
            raise usage_error('--episodes 必須 ≥ 1')
        config, agents = open_checkpoint(options['checkpoint'])
        split_kind = options['split'] or config.split
        split = make_split(split_kind)
        mode = SplitMode(options['mode'])
        episodes, seed = options['episodes'], options['seed']
        parallel = settings.HELDOUT_USE_CELERY if options['parallel'] is None else options['parallel']

        task_classes = task_classes_for(split, mode, None if mode == SplitMode.TEST else config.task_verb)
        if not task_classes:
            raise usage_error(EmptyTestSet(f"split={split_kind} mode={mode} 沒有可評估的 concept"))

        if parallel:
            from celery_app.tasks.evaluation import dispatch_heldout
            results = dispatch_heldout(agents, format_config(config), split_kind, task_classes,
                                       episodes, seed, mode, config.t_max)
        elif mode == SplitMode.TEST:
            results = evaluate_zero_shot(agents, split, episodes, seed, t_max=config.t_max)
        else:
            results = evaluate_heldout(agents, split, task_classes, episodes, seed, mode=mode, t_max=config.t_max)

        report_text = format_report(results)
        self.stdout.write(report_text, ending='')

        if options['random_baseline']:
            baseline = random_policy_baseline(split, task_classes, episodes, seed, mode=mode, t_max=config.t_max)
            self.stdout.write(self.style.WARNING('# random policy'))
            self.stdout.write(format_report(baseline), ending='')

        EvaluationReport.objects.create(
            run=TrainingRun.objects.filter(config_hash=config_hash(config)).first(),
            checkpoint_path=str(options['checkpoint']),
            split=split_kind,
            mode=mode,
            seed=seed,
            results=[
                {'task_class': r.task_class, 'accuracy': r.accuracy, 'episodes': r.episodes} for r in results
            ],
            report_text=report_text,
        )
