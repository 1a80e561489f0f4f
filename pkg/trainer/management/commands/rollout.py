from pathlib import Path

import numpy as np
from django.core.management.base import CommandError

from concepts.models import TASK_CLASSES
from concepts.splits import SplitMode, make_split
from gridworld.dump import dump_trajectory, replay_dump
from gridworld.generator import EmptyTaskClass, generate_episode
from listener.models import ARMS
from trainer.cli import EXIT_VERIFICATION, LabCommand, artifact_error, open_checkpoint, usage_error
from trainer.episode import run_episode


class Command(LabCommand):
    help = '用 checkpoint 跑一回合並輸出軌跡文字檔；或以 --replay 重新模擬既有的軌跡檔'

    def add_arguments(self, parser):
        parser.add_argument('checkpoint', nargs='?', help='checkpoint.bin 路徑')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--split', choices=['none', 'visual', 'numeral'],
                            help='預設使用 checkpoint 訓練時的 split')
        parser.add_argument('--mode', choices=['train', 'test'], default='train', help='從哪一組 concept 抽題')
        parser.add_argument('--task', choices=TASK_CLASSES, help='限定 task class')
        parser.add_argument('--sample', action='store_true', help='依機率抽樣動作（預設 argmax）')
        parser.add_argument('--output', help='寫入檔案，預設輸出到 stdout')
        parser.add_argument('--replay', metavar='DUMP', help='重新模擬軌跡檔並比對每一步')

    def handle(self, *args, **options):
        if options['replay']:
            self.replay(Path(options['replay']))
            return
        if not options['checkpoint']:
            raise usage_error('需要 checkpoint 路徑（或使用 --replay）')

        config, agents = open_checkpoint(options['checkpoint'])
        split = make_split(options['split'] or config.split)
        rng = np.random.default_rng(options['seed'])
        try:
            state = generate_episode(rng, split, SplitMode(options['mode']), task_filter=options['task'],
                                     t_max=config.t_max)
        except EmptyTaskClass as e:
            raise usage_error(e) from e

        trajectory = run_episode(state, agents, rng, mode='train' if options['sample'] else 'eval',
                                 record_states=True)
        dump = dump_trajectory(trajectory.states, trajectory.actions, trajectory.env_rewards)

        message = str(trajectory.message) if trajectory.message is not None else '-'
        self.stderr.write(f'concept {trajectory.concept}  message {message}  arm {ARMS[trajectory.arm_index]}  '
                          f'success {int(trajectory.success)}')
        if options['output']:
            Path(options['output']).write_text(dump, encoding='utf-8')
            self.stderr.write(self.style.SUCCESS(f"✅ 軌跡已寫入 {options['output']}"))
        else:
            self.stdout.write(dump, ending='')

    def replay(self, path: Path):
        if not path.is_file():
            raise artifact_error(f'找不到軌跡檔：{path}')
        try:
            result = replay_dump(path.read_text(encoding='utf-8'))
        except (ValueError, KeyError) as e:
            raise artifact_error(f'軌跡檔格式錯誤：{e}') from e
        if not result.ok:
            self.stderr.write(f'   預期：{result.expected}')
            self.stderr.write(f'   實際：{result.actual}')
            raise CommandError(f'第 {result.divergent_step} 步與重新模擬不一致', returncode=EXIT_VERIFICATION)
        self.stdout.write(self.style.SUCCESS(f'✅ 重新模擬 {result.steps} 步，全部一致'))
