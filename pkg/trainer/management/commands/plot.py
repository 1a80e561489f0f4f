from diffcore.checkpoint import MissingArtifact
from trainer.cli import LabCommand, artifact_error, usage_error
from trainer.plotting import plot_curves


class Command(LabCommand):
    help = '由一或多個 metrics.csv 畫出成功率與 topsim 曲線（PNG）'

    def add_arguments(self, parser):
        parser.add_argument('csv', nargs='+', help='metrics.csv 路徑')
        parser.add_argument('--output', default='curves.png', help='輸出圖檔（預設 curves.png）')
        parser.add_argument('--label', dest='labels', action='append', help='每個 CSV 的圖例名稱，依序對應')
        parser.add_argument('--window', type=int, default=200, help='訓練成功率的移動平均視窗')

    def handle(self, *args, **options):
        try:
            output = plot_curves(options['csv'], options['output'], options['labels'], options['window'])
        except MissingArtifact as e:
            raise artifact_error(e) from e
        except ValueError as e:
            raise usage_error(e) from e
        self.stdout.write(self.style.SUCCESS(f'✅ 圖表已輸出至 {output}'))
