from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='RunTrail',
            fields=[
                ('id', models.AutoField(primary_key=True, serialize=False)),
                ('action_time', models.DateTimeField(auto_now_add=True)),
                ('command', models.CharField(editable=False, max_length=32)),
                ('status', models.CharField(choices=[('Started', 'Started'), ('Completed', 'Completed'), ('Failed', 'Failed')], editable=False, max_length=16)),
                ('config_digest', models.CharField(blank=True, editable=False, max_length=64)),
                ('seed', models.BigIntegerField(blank=True, editable=False, null=True)),
                ('output_path', models.CharField(blank=True, editable=False, max_length=1024)),
                ('message', models.TextField(blank=True, editable=False)),
            ],
            options={
                'verbose_name': 'Run Trail',
                'verbose_name_plural': 'Run Trail',
                'db_table': 'run_trail',
                'ordering': ['-action_time', '-id'],
                'indexes': [
                    models.Index(fields=['action_time'], name='run_trail_action__idx'),
                    models.Index(fields=['command'], name='run_trail_command_idx'),
                    models.Index(fields=['config_digest'], name='run_trail_config__idx'),
                ],
            },
        ),
    ]
