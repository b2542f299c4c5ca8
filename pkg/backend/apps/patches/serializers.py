from rest_framework import serializers

from apps.patches.labels import Author

PAINTING_ID_MAX_LENGTH = 64


class ManifestEntrySerializer(serializers.Serializer):
    """One painting line of a dataset manifest"""
    path = serializers.CharField()
    painting_id = serializers.CharField(max_length=PAINTING_ID_MAX_LENGTH)
    author = serializers.ChoiceField(choices=[author.value for author in Author])

    def validate_painting_id(self, value):
        if '/' in value or '\\' in value:
            raise serializers.ValidationError('Painting id is used in file names and must not contain path separators')
        return value
