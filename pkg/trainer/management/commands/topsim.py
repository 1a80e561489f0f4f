from concepts.models import SLOT_NAMES
from speaker.language import count_collisions, format_language_table
from intrinsic.discriminator import slot_accuracy
from trainer.agents import agent_language_table
from trainer.cli import LabCommand, open_checkpoint, usage_error
from trainer.topsim import topsim


class Command(LabCommand):
    help = '計算 checkpoint 語言的 topographic similarity，並輸出 concept → message 對照表'

    def add_arguments(self, parser):
        parser.add_argument('checkpoint', help='checkpoint.bin 路徑')
        parser.add_argument('--no-table', action='store_true', help='不輸出對照表')

    def handle(self, *args, **options):
        _, agents = open_checkpoint(options['checkpoint'])
        table = agent_language_table(agents)
        if table is None:
            raise usage_error('這個 checkpoint 沒有 speaker（speaker = none），無法計算 topsim')

        result = topsim(table)
        self.stdout.write(f'topsim {result.value:.6f}')
        if result.degenerate:
            self.stderr.write(self.style.WARNING('⚠️  所有訊息距離相同，topsim 無定義，以 0 回報'))

        collisions = count_collisions(table)
        self.stdout.write(f'collisions {collisions}')

        if agents.discriminator is not None:
            accuracy = slot_accuracy(agents.discriminator, table.items())
            self.stdout.write('slot_accuracy ' + ' '.join(
                f'{name}={value:.4f}' for name, value in zip(SLOT_NAMES, accuracy)
            ))

        if not options['no_table']:
            self.stdout.write(format_language_table(table), ending='')
