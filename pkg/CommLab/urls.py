"""
URL configuration for CommLab project.

只開放 Django Admin，用來瀏覽訓練紀錄與評估報告。
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('admin/', admin.site.urls),
]
