from django.db import models


class RunTrail(models.Model):
    """
    Immutable record of one command-line run.

    Entries are append-only: a run writes Started and then Completed or
    Failed. Saved records cannot be modified or deleted.
    """
    STARTED = 'Started'
    COMPLETED = 'Completed'
    FAILED = 'Failed'
    STATUS_CHOICES = [(STARTED, STARTED), (COMPLETED, COMPLETED), (FAILED, FAILED)]

    id = models.AutoField(primary_key=True)
    action_time = models.DateTimeField(auto_now_add=True, editable=False)
    command = models.CharField(max_length=32, editable=False)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, editable=False)
    config_digest = models.CharField(max_length=64, blank=True, editable=False)
    seed = models.BigIntegerField(null=True, blank=True, editable=False)
    output_path = models.CharField(max_length=1024, blank=True, editable=False)
    message = models.TextField(blank=True, editable=False)

    class Meta:
        db_table = 'run_trail'
        verbose_name = 'Run Trail'
        verbose_name_plural = 'Run Trail'
        indexes = [
            models.Index(fields=['action_time'], name='run_trail_action__idx'),
            models.Index(fields=['command'], name='run_trail_command_idx'),
            models.Index(fields=['config_digest'], name='run_trail_config__idx'),
        ]
        ordering = ['-action_time', '-id']

    def __str__(self):
        return f'[{self.action_time}] {self.command} {self.status}: {self.message[:50]}'

    def save(self, *args, **kwargs):
        """Only creation is allowed."""
        if self.pk is not None:
            raise ValueError('Run trail records cannot be modified once created')
        super().save(*args, **kwargs)

    def delete(self, *args, **kwargs):
        raise ValueError('Run trail records cannot be deleted')
