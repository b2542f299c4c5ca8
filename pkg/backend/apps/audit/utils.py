"""
Run trail logging utilities.

Every command-line run records Started and then Completed or Failed. A
missing or broken database never stops a computation: the failure is logged
and the run continues without a trail entry.
"""

import logging

from django.db import DatabaseError

from apps.audit.models import RunTrail

logger = logging.getLogger('apps.audit')


def log_run_event(command, status, message='', config_digest='', seed=None, output_path=''):
    """
    Create an immutable run trail entry.

    Returns:
        RunTrail object, or None when the database is unavailable
    """
    try:
        entry = RunTrail.objects.create(
            command=command,
            status=status,
            config_digest=config_digest or '',
            seed=seed,
            output_path=str(output_path or ''),
            message=message,
        )
    except DatabaseError as exc:
        logger.warning('Run trail unavailable, %s %s not recorded: %s', command, status, exc)
        return None

    logger.info('[RUN] %s %s (config %s, seed %s): %s', command, status, config_digest[:12] or '-', seed, message)
    return entry


def log_run_started(command, config_digest='', seed=None, output_path=''):
    return log_run_event(command, RunTrail.STARTED, f'{command} started', config_digest, seed, output_path)


def log_run_completed(command, config_digest='', seed=None, output_path='', message=''):
    return log_run_event(
        command, RunTrail.COMPLETED, message or f'{command} completed', config_digest, seed, output_path,
    )


def log_run_failed(command, error, config_digest='', seed=None, output_path=''):
    return log_run_event(
        command, RunTrail.FAILED, f'{command} failed: {error}', config_digest, seed, output_path,
    )
