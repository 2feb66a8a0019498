import os

from .errors import JobValidationError, NumericalError
from .jobs import run_job
from .utils import (
    setup_config,
    setup_logger,
    to_jsonable,
    write_csv,
    write_json,
)

config = setup_config()
logger = setup_logger(__name__, config)

STATUS_OK = 0
STATUS_VALIDATION = 2
STATUS_NUMERICAL = 3


def error_body(error):
    body = {"error": type(error).__name__, "message": str(error)}
    if isinstance(error, JobValidationError):
        body["pointer"] = error.pointer
    if isinstance(error, NumericalError):
        body["diagnostics"] = to_jsonable(error.diagnostics)
    return body


def write_artifacts(body, tables, out, name):
    os.makedirs(out, exist_ok=True)
    write_json(body, os.path.join(out, f"{name}.json"))
    for key, table in tables.items():
        write_csv(table, os.path.join(out, f"{name}_{key}.csv"))


def handler(event, context=None):
    logger.info("## EVENT DATA")
    logger.info(event)

    try:
        body, tables = run_job(event)
    except NumericalError as error:
        logger.error(f"Numerical failure: {error}")
        status, body, tables = STATUS_NUMERICAL, error_body(error), {}
    except ValueError as error:
        logger.error(f"Invalid job: {error}")
        status, body, tables = STATUS_VALIDATION, error_body(error), {}
    except Exception as error:
        logger.exception(f"Job failed: {error!r}")
        status, body, tables = STATUS_NUMERICAL, error_body(error), {}
    else:
        status = STATUS_OK

    if out := event.get("out"):
        name = event.get("name") or event.get("command", "job")
        write_artifacts(body, tables, out, name)

    return {
        "statusCode": status,
        "body": to_jsonable(body),
        "tables": tables,
    }
