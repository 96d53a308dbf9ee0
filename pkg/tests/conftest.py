"""Shared fixtures: service builders and a live-server helper."""

import contextlib
import socket
import threading
import time

import pytest

from ams.gateway.service import AttendanceService, ServiceConfig
from ams.ledger import AlertConfig

CSV_THREE = """student_id,name1,name2,email
s001,Yamada,Taro,taro@x
s002,Suzuki,Hanako,hanako@x
s003,Sato,Jiro,jiro@x
"""


def make_service(tmp_path, device_id="devA", token="") -> AttendanceService:
    config = ServiceConfig(
        data_dir=tmp_path / device_id,
        device_id=device_id,
        pairing_token=token,
        default_alert=AlertConfig(),
    )
    return AttendanceService(config)


@pytest.fixture
def service(tmp_path):
    return make_service(tmp_path)


@contextlib.contextmanager
def live_server(app):
    """Run a FastAPI app in a uvicorn thread; yields its base URL."""
    import uvicorn

    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        port = probe.getsockname()[1]
    config = uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    try:
        yield f"http://127.0.0.1:{port}"
    finally:
        server.should_exit = True
        thread.join(timeout=5)
