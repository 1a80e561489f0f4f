from trainer.cli import LabCommand, parse_assignments, training_error, usage_error
from trainer.config import ConfigInvalid, load_config
from trainer.loop import resolve_output_dir
from trainer.models import TrainingRun


class Command(LabCommand):
    help = '訓練 speaker / listener，輸出 effective.cfg、metrics.csv 與 checkpoint.bin'

    def add_arguments(self, parser):
        parser.add_argument('--config', help='key = value 格式的設定檔')
        parser.add_argument('--seed', type=int)
        parser.add_argument('--split', choices=['none', 'visual', 'numeral'])
        parser.add_argument('--speaker', choices=['learned', 'perfect', 'none'])
        parser.add_argument('--task', choices=['all', 'walk', 'push', 'pull'], help='只訓練某個動詞')
        parser.add_argument('--lambda1', type=float, help='coverage reward 權重')
        parser.add_argument('--lambda3', type=float, help='influence reward 權重')
        parser.add_argument('--k', type=int, help='influence 的 pseudo message 數量')
        parser.add_argument('--nm', dest='n_m', type=int, help='訊息長度')
        parser.add_argument('--dm', dest='d_m', type=int, help='字母表大小')
        parser.add_argument('--episodes', type=int)
        parser.add_argument('--output-dir', dest='output_dir')
        parser.add_argument('--oracle-listener', dest='oracle_listener', action='store_const', const=True)
        parser.add_argument('--no-coverage', dest='use_coverage', action='store_const', const=False)
        parser.add_argument('--no-influence', dest='use_influence', action='store_const', const=False)
        parser.add_argument('--no-env-reward', dest='env_reward', action='store_const', const=False)
        parser.add_argument('--set', dest='assignments', action='append', metavar='KEY=VALUE',
                            help='覆蓋任意設定鍵，可重複使用')
        parser.add_argument('--async', dest='run_async', action='store_true',
                            help='送到 Celery training_queue 背景執行')

    def handle(self, *args, **options):
        overrides = parse_assignments(options['assignments'])
        for key in ('seed', 'split', 'speaker', 'task', 'lambda1', 'lambda3', 'k', 'n_m', 'd_m',
                    'episodes', 'output_dir', 'oracle_listener', 'use_coverage', 'use_influence', 'env_reward'):
            if options.get(key) is not None:
                overrides[key] = options[key]

        try:
            config = load_config(options['config'], overrides)
        except ConfigInvalid as e:
            raise usage_error(e) from e

        output_dir = resolve_output_dir(config)
        run = TrainingRun.create_for_config(config, output_dir)

        if options['run_async']:
            from celery_app.tasks.training import train_async
            task = train_async.delay(run.id)
            run.task_id = task.id
            run.save(update_fields=['task_id', 'updated_at'])
            self.stdout.write(self.style.SUCCESS(f'📤 已送出訓練 #{run.id}（task {task.id}），輸出至 {output_dir}'))
            return

        from celery_app.tasks.training import run_training

        self.stdout.write(self.style.SUCCESS(f'\n🚀 訓練 #{run.id}：{config.episodes} 回合，輸出至 {output_dir}'))

        def report(snapshot):
            heldout = ' '.join(f'{task}={value:.2f}' for task, value in snapshot.heldout.items())
            self.stdout.write(f'   第 {snapshot.episode} 回合  {heldout}  topsim={snapshot.topsim:.3f}')

        outcome = run_training(run, progress=report if options['verbosity'] >= 1 else None)
        if outcome['status'] != 'completed':
            self.stderr.write(self.style.ERROR(f"❌ 訓練失敗，詳細堆疊已寫入 TrainingRun #{run.id}"))
            raise training_error(outcome['error'])

        self.stdout.write(self.style.SUCCESS(f"✅ 完成：{outcome['metrics_path']}"))
        self.stdout.write(self.style.SUCCESS(f"✅ checkpoint：{outcome['checkpoint_path']}"))
