"""Toolkit for edit-based human-AI writing alignment: corpus model, edit
analytics, span metrics, idiosyncrasy mining, automatic editing pipeline,
preference statistics, and the annotation service.
"""

__version__ = "0.1.0"
