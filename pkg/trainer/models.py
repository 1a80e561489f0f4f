from django.db import models


class RunStatusChoices(models.TextChoices):
    PENDING = 'pending', 'Pending'
    PROCESSING = 'processing', 'Processing'
    COMPLETED = 'completed', 'Completed'
    FAILED = 'failed', 'Failed'


class TrainingRun(models.Model):
    config_text = models.TextField(help_text='effective config（key = value）')
    config_hash = models.CharField(max_length=64, db_index=True)
    seed = models.IntegerField(default=0)
    split = models.CharField(max_length=16, default='none')
    speaker = models.CharField(max_length=16, default='learned')
    output_dir = models.CharField(max_length=512)
    status = models.CharField(
        max_length=16,
        choices=RunStatusChoices.choices,
        default=RunStatusChoices.PENDING,
        db_index=True,
    )
    episodes_done = models.IntegerField(default=0)
    final_heldout = models.JSONField(default=None, null=True, blank=True)
    final_topsim = models.FloatField(default=None, null=True, blank=True)
    task_id = models.CharField(max_length=64, blank=True)
    traceback = models.TextField(blank=True, null=True, default=None)
    created_at = models.DateTimeField(auto_now_add=True)
    updated_at = models.DateTimeField(auto_now=True)

    class Meta:
        verbose_name = "訓練紀錄"
        verbose_name_plural = "訓練紀錄"
        ordering = ['-updated_at']

    def __str__(self):
        return f"{self.speaker}/{self.split} seed={self.seed} ({self.status})"

    @classmethod
    def create_for_config(cls, config, output_dir) -> 'TrainingRun':
        from trainer.config import config_hash, format_config
        return cls.objects.create(
            config_text=format_config(config),
            config_hash=config_hash(config),
            seed=config.seed,
            split=config.split,
            speaker=config.speaker,
            output_dir=str(output_dir),
        )

    def mark(self, status, **fields):
        self.status = status
        for name, value in fields.items():
            setattr(self, name, value)
        self.save()


class EvaluationReport(models.Model):
    run = models.ForeignKey(TrainingRun, on_delete=models.SET_NULL, null=True, blank=True,
                            related_name='reports')
    checkpoint_path = models.CharField(max_length=512)
    split = models.CharField(max_length=16)
    mode = models.CharField(max_length=8, default='test')
    seed = models.IntegerField(default=0)
    results = models.JSONField(default=list, help_text='[{task_class, accuracy, episodes}]')
    report_text = models.TextField(blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        verbose_name = "評估報告"
        verbose_name_plural = "評估報告"
        ordering = ['-created_at']

    def __str__(self):
        return f"{self.checkpoint_path} [{self.split}/{self.mode}]"
