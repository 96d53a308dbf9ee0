"""Operational surface: HTTP API for the console, CLI for batch work."""

from .service import AttendanceService, ServiceConfig

__all__ = ["AttendanceService", "ServiceConfig"]
