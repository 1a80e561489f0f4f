# Generated by Django 5.2.3 on 2026-10-19 09:30

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('config_text', models.TextField(help_text='effective config（key = value）')),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('seed', models.IntegerField(default=0)),
                ('split', models.CharField(default='none', max_length=16)),
                ('speaker', models.CharField(default='learned', max_length=16)),
                ('output_dir', models.CharField(max_length=512)),
                ('status', models.CharField(choices=[('pending', 'Pending'), ('processing', 'Processing'), ('completed', 'Completed'), ('failed', 'Failed')], db_index=True, default='pending', max_length=16)),
                ('episodes_done', models.IntegerField(default=0)),
                ('final_heldout', models.JSONField(blank=True, default=None, null=True)),
                ('final_topsim', models.FloatField(blank=True, default=None, null=True)),
                ('task_id', models.CharField(blank=True, max_length=64)),
                ('traceback', models.TextField(blank=True, default=None, null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'verbose_name': '訓練紀錄',
                'verbose_name_plural': '訓練紀錄',
                'ordering': ['-updated_at'],
            },
        ),
        migrations.CreateModel(
            name='EvaluationReport',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('checkpoint_path', models.CharField(max_length=512)),
                ('split', models.CharField(max_length=16)),
                ('mode', models.CharField(default='test', max_length=8)),
                ('seed', models.IntegerField(default=0)),
                ('results', models.JSONField(default=list, help_text='[{task_class, accuracy, episodes}]')),
                ('report_text', models.TextField(blank=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='reports', to='trainer.trainingrun')),
            ],
            options={
                'verbose_name': '評估報告',
                'verbose_name_plural': '評估報告',
                'ordering': ['-created_at'],
            },
        ),
    ]
