from django.contrib import admin
from django.utils.html import format_html
from .models import TrainingRun, EvaluationReport


class HasErrorFilter(admin.SimpleListFilter):
    title = '錯誤狀態'
    parameter_name = 'has_error'

    def lookups(self, request, model_admin):
        return (
            ('yes', '有錯誤'),
            ('no', '無錯誤'),
        )

    def queryset(self, request, queryset):
        if self.value() == 'yes':
            return queryset.exclude(traceback__isnull=True).exclude(traceback='')
        if self.value() == 'no':
            return queryset.filter(traceback__isnull=True) | queryset.filter(traceback='')
        return queryset


class EvaluationReportInline(admin.TabularInline):
    model = EvaluationReport
    extra = 0
    fields = ['split', 'mode', 'seed', 'report_text', 'created_at']
    readonly_fields = fields


@admin.register(TrainingRun)
class TrainingRunAdmin(admin.ModelAdmin):
    list_display = ['id', 'speaker', 'split', 'seed', 'status', 'episodes_done', 'final_topsim', 'has_error', 'updated_at']
    list_filter = ['status', 'speaker', 'split', HasErrorFilter]
    search_fields = ['config_hash', 'output_dir', 'task_id']
    readonly_fields = ['config_hash', 'traceback_display', 'created_at', 'updated_at']
    ordering = ['-updated_at']
    inlines = [EvaluationReportInline]

    fieldsets = (
        ('基本資訊', {
            'fields': ('speaker', 'split', 'seed', 'status', 'episodes_done', 'output_dir', 'task_id')
        }),
        ('結果', {
            'fields': ('final_heldout', 'final_topsim')
        }),
        ('設定', {
            'fields': ('config_text', 'config_hash'),
            'classes': ('collapse',)
        }),
        ('錯誤追蹤', {
            'fields': ('traceback_display',),
            'classes': ('collapse',)
        }),
    )

    def has_error(self, obj):
        if obj.traceback:
            return "❌ 有錯誤"
        return "✅ 正常"
    has_error.short_description = "錯誤狀態"
    has_error.admin_order_field = 'traceback'

    def traceback_display(self, obj):
        if obj.traceback:
            return format_html(
                '<pre style="background: #f8f9fa; padding: 10px; font-size: 12px; '
                'max-height: 300px; overflow: auto;">{}</pre>',
                obj.traceback
            )
        return "無錯誤記錄"
    traceback_display.short_description = "錯誤追蹤"


@admin.register(EvaluationReport)
class EvaluationReportAdmin(admin.ModelAdmin):
    list_display = ['checkpoint_path', 'split', 'mode', 'seed', 'run', 'created_at']
    list_filter = ['split', 'mode', 'created_at']
    search_fields = ['checkpoint_path', 'report_text']
    readonly_fields = ['created_at']
    ordering = ['-created_at']

    def get_queryset(self, request):
        return super().get_queryset(request).select_related('run')
