from pathlib import Path

from django.conf import settings
from django.core.management.base import CommandError

from concepts.splits import SplitMode, make_split
from diffcore.checkpoint import load_checkpoint
from trainer.agents import agents_from_checkpoint
from trainer.cli import EXIT_VERIFICATION, LabCommand, parse_assignments, training_error, usage_error
from trainer.config import ConfigInvalid
from trainer.evaluation import evaluate_heldout
from trainer.experiments import CHECKS, EXPERIMENTS, ZERO_SHOT_TASKS, plan_runs, run_rows, summary_frame
from trainer.loop import CSV_FLOAT_FORMAT, resolve_output_dir
from trainer.models import TrainingRun

SUMMARY_NAME = 'summary.csv'


class Command(LabCommand):
    help = '多 seed 比較實驗：walk（學習曲線）、topsim（組合性）、zeroshot（zero-shot 成功率）'

    def add_arguments(self, parser):
        parser.add_argument('experiment', choices=sorted(EXPERIMENTS), help='要重現的比較實驗')
        parser.add_argument('--seeds', type=int, default=5, help='seed 數量（預設 5）')
        parser.add_argument('--first-seed', type=int, default=0)
        parser.add_argument('--episodes', type=int, help='每個 run 的訓練回合數（預設依設定檔）')
        parser.add_argument('--eval-episodes', type=int, default=500, help='zero-shot 每個 task class 的回合數')
        parser.add_argument('--output-root', default='runs/reproduce', help='相對路徑以 LAB_OUTPUT_DIR 為基準')
        parser.add_argument('--set', dest='assignments', action='append', metavar='KEY=VALUE',
                            help='套用到所有 run 的設定覆蓋，可重複使用')
        parser.add_argument('--strict', action='store_true', help='方向性檢查未通過時以 exit code 2 結束')

    def handle(self, *args, **options):
        if options['seeds'] < 1 or options['eval_episodes'] < 1:
            raise usage_error('--seeds 與 --eval-episodes 必須 ≥ 1')
        name = options['experiment']
        overrides = parse_assignments(options['assignments'])
        if options['episodes'] is not None:
            overrides['episodes'] = options['episodes']

        output_root = Path(options['output_root'])
        if not output_root.is_absolute():
            output_root = Path(settings.LAB_OUTPUT_DIR) / output_root
        seeds = range(options['first_seed'], options['first_seed'] + options['seeds'])
        try:
            planned = plan_runs(name, seeds, output_root, overrides)
        except ConfigInvalid as e:
            raise usage_error(e) from e

        from celery_app.tasks.training import run_training

        self.stdout.write(self.style.SUCCESS(f'\n🧪 {name}：{len(planned)} 個 run，輸出至 {output_root / name}'))
        rows = []
        for run in planned:
            record = TrainingRun.create_for_config(run.config, resolve_output_dir(run.config))
            outcome = run_training(record)
            if outcome['status'] != 'completed':
                self.stderr.write(self.style.ERROR(f"❌ {run.preset} seed={run.seed} 失敗，堆疊見 TrainingRun #{record.id}"))
                raise training_error(outcome['error'])
            record.refresh_from_db()

            zero_shot = []
            if run.split in ZERO_SHOT_TASKS:
                _, agents = agents_from_checkpoint(load_checkpoint(outcome['checkpoint_path']))
                zero_shot = evaluate_heldout(
                    agents, make_split(run.split), list(ZERO_SHOT_TASKS[run.split]), options['eval_episodes'],
                    run.seed, mode=SplitMode.TEST, t_max=run.config.t_max,
                )
            rows.extend(run_rows(run, record.final_heldout or {}, record.final_topsim, zero_shot))

            heldout = ' '.join(f'{task}={value:.2f}' for task, value in (record.final_heldout or {}).items())
            topsim = '-' if record.final_topsim is None else f'{record.final_topsim:.3f}'
            shots = ' '.join(f'zs_{result.task_class}={result.accuracy:.3f}' for result in zero_shot)
            self.stdout.write(f'   {run.preset:<15} {run.split:<8} seed={run.seed}  {heldout}  topsim={topsim}  {shots}')

        frame = summary_frame(rows)
        summary_path = output_root / name / SUMMARY_NAME
        summary_path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(summary_path, index=False, float_format=CSV_FLOAT_FORMAT)
        self.stdout.write(self.style.SUCCESS(f'\n📊 summary：{summary_path}'))

        checks = CHECKS[name](frame)
        for check in checks:
            style = self.style.SUCCESS if check.ok else self.style.WARNING
            mark = '✅' if check.ok else '⚠️'
            self.stdout.write(style(f'   {mark} {check.description}：{check.detail}'))

        if options['strict'] and not all(check.ok for check in checks):
            raise CommandError('方向性檢查未通過', returncode=EXIT_VERIFICATION)
