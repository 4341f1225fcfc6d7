"""
Polynomial two-timescale step sizes and step-size diagnostics
"""
from .step_schedule import PRESETS, ScheduleCheck, ScheduleReport, StepSchedule, check_schedule

__all__ = ['PRESETS', 'ScheduleCheck', 'ScheduleReport', 'StepSchedule', 'check_schedule']
