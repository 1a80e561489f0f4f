import time

from django.core.management.base import CommandError

from diffcore.gradcheck import random_graph_suite, straight_through_dual_check
from gridworld.differential import exhaustive_small_suite, randomized_suite
from trainer.cli import EXIT_VERIFICATION, LabCommand

STRAIGHT_THROUGH_TOLERANCE = 1e-6


class Command(LabCommand):
    help = '環境差分驗證（step 對 reference_step）與自動微分梯度檢查'

    def add_arguments(self, parser):
        parser.add_argument('--transitions', type=int, default=100_000, help='4×4 隨機 transition 數量')
        parser.add_argument('--graphs', type=int, default=100, help='梯度檢查的隨機計算圖數量')
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        seed = options['seed']
        failures = []

        self.stdout.write(self.style.SUCCESS('\n🔍 環境差分驗證'))
        started = time.monotonic()
        exhaustive = exhaustive_small_suite()
        self.write_check('3×3 窮舉', exhaustive.ok, f'{exhaustive.transitions} transitions，'
                                                    f'{len(exhaustive.mismatches)} 不一致')
        randomized = randomized_suite(options['transitions'], seed)
        self.write_check('4×4 隨機', randomized.ok, f'{randomized.transitions} transitions，'
                                                   f'{len(randomized.mismatches)} 不一致')
        for report in (exhaustive, randomized):
            failures.extend(str(mismatch) for mismatch in report.mismatches[:5])
        self.stdout.write(f'   耗時 {time.monotonic() - started:.1f} 秒')

        self.stdout.write(self.style.SUCCESS('\n🧮 梯度檢查'))
        suite = random_graph_suite(options['graphs'], seed)
        self.write_check('有限差分', suite.ok, f'{suite.graphs} 個計算圖，最大相對誤差 {suite.max_relative_error:.2e}')
        failures.extend(f'{failure.name}: {failure.max_relative_error:.2e}' for failure in suite.failures)

        worst = straight_through_dual_check(seed=seed)
        st_ok = worst < STRAIGHT_THROUGH_TOLERANCE
        self.write_check('straight-through', st_ok, f'與 softmax 路徑最大差 {worst:.2e}')
        if not st_ok:
            failures.append(f'straight-through 差 {worst:.2e}')

        if not (exhaustive.ok and randomized.ok and suite.ok and st_ok):
            for failure in failures:
                self.stderr.write(f'   {failure}')
            raise CommandError('驗證失敗', returncode=EXIT_VERIFICATION)
        self.stdout.write(self.style.SUCCESS('\n✅ 全部驗證通過'))

    def write_check(self, name: str, ok: bool, detail: str):
        style = self.style.SUCCESS if ok else self.style.ERROR
        mark = '✅' if ok else '❌'
        self.stdout.write(style(f'   {mark} {name}：{detail}'))
