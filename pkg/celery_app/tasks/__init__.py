# 訓練與 held-out 評估的 Celery 任務
