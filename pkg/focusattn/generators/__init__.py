from .base import ReportGenerator

__all__ = ["ReportGenerator"]
