"""
Tests for the Audit App

Run tests with: python manage.py test apps.audit
"""

from unittest.mock import patch

from django.db import DatabaseError
from django.test import TestCase

from apps.audit.models import RunTrail
from apps.audit.utils import log_run_completed, log_run_failed, log_run_started


class RunTrailTests(TestCase):
    """Tests for the immutable run trail."""

    def test_started_and_completed(self):
        log_run_started('crossval', config_digest='ab' * 32, seed=3, output_path='/tmp/run')
        log_run_completed('crossval', config_digest='ab' * 32, seed=3, output_path='/tmp/run')
        statuses = list(RunTrail.objects.order_by('id').values_list('status', flat=True))
        self.assertEqual(statuses, ['Started', 'Completed'])

    def test_failed_message(self):
        entry = log_run_failed('train', ValueError('bad lr'))
        self.assertEqual(entry.message, 'train failed: bad lr')

    def test_records_are_immutable(self):
        entry = log_run_started('synth')
        entry.message = 'edited'
        with self.assertRaises(ValueError):
            entry.save()
        with self.assertRaises(ValueError):
            entry.delete()

    def test_database_errors_are_swallowed(self):
        """A broken database logs a warning instead of failing the run."""
        with patch.object(RunTrail.objects, 'create', side_effect=DatabaseError('no such table')):
            with self.assertLogs('apps.audit', level='WARNING'):
                self.assertIsNone(log_run_started('entropy'))
