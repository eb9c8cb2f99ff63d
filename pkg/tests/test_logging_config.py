import json
import logging
from logging.handlers import RotatingFileHandler

import pytest
from pythonjsonlogger.json import JsonFormatter

from nshr.logging_config import setup_logging


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    setup_logging(file_logging=False)


def _handlers():
    return logging.getLogger("nshr").handlers


def test_file_handler_is_dropped_when_disabled():
    setup_logging(file_logging=False)
    assert not any(isinstance(h, RotatingFileHandler) for h in _handlers())
    assert len(_handlers()) == 1


def test_log_file_override_creates_the_directory(tmp_path):
    target = tmp_path / "deep" / "run.log"
    setup_logging(log_file=str(target))
    files = [h for h in _handlers() if isinstance(h, RotatingFileHandler)]
    assert len(files) == 1
    assert files[0].baseFilename == str(target)

    logging.getLogger("nshr.services.bench").info("plan started")
    files[0].flush()
    record = json.loads(target.read_text(encoding="utf8").splitlines()[-1])
    assert record["message"] == "plan started"
    assert record["name"] == "nshr.services.bench"
    files[0].close()


def test_json_console_formatter():
    setup_logging(json_console=True, file_logging=False)
    (console,) = _handlers()
    assert isinstance(console.formatter, JsonFormatter)


def test_level_overrides():
    setup_logging(console_level="debug", package_level="info", file_logging=False)
    (console,) = _handlers()
    assert console.level == logging.DEBUG
    assert logging.getLogger("nshr").level == logging.INFO


def test_missing_configuration_falls_back(tmp_path, caplog):
    with caplog.at_level(logging.WARNING):
        setup_logging(default_path=str(tmp_path / "absent.json"))
    assert "not found" in caplog.text
