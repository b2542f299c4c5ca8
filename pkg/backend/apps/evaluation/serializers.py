from rest_framework import serializers

from apps.patches.labels import Author
from apps.patches.serializers import PAINTING_ID_MAX_LENGTH

POSTERIOR_TOLERANCE = 1e-6


class PatchPosteriorSerializer(serializers.Serializer):
    """Per-patch class posterior, one line of a posteriors file"""
    painting_id = serializers.CharField(max_length=PAINTING_ID_MAX_LENGTH)
    author = serializers.ChoiceField(choices=[author.value for author in Author])
    x = serializers.IntegerField(min_value=0)
    y = serializers.IntegerField(min_value=0)
    size = serializers.IntegerField(min_value=1)
    label = serializers.IntegerField(min_value=0, max_value=2, allow_null=True, required=False)
    p_blank = serializers.FloatField(min_value=0.0, max_value=1.0)
    p_human = serializers.FloatField(min_value=0.0, max_value=1.0)
    p_robot = serializers.FloatField(min_value=0.0, max_value=1.0)

    def validate(self, data):
        total = data['p_blank'] + data['p_human'] + data['p_robot']
        if abs(total - 1.0) > POSTERIOR_TOLERANCE:
            raise serializers.ValidationError(f'Posterior sums to {total}, expected 1')
        return data
