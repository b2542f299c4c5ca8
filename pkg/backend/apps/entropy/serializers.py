from rest_framework import serializers

from apps.patches.serializers import PAINTING_ID_MAX_LENGTH


class AnnotationRegionSerializer(serializers.Serializer):
    """One annotated rectangle, half-open pixel bounds [x0, x1) x [y0, y1)"""
    painting_id = serializers.CharField(max_length=PAINTING_ID_MAX_LENGTH)
    x0 = serializers.IntegerField(min_value=0)
    y0 = serializers.IntegerField(min_value=0)
    x1 = serializers.IntegerField(min_value=1)
    y1 = serializers.IntegerField(min_value=1)

    def validate(self, data):
        if data['x0'] >= data['x1'] or data['y0'] >= data['y1']:
            raise serializers.ValidationError(
                f"Empty region ({data['x0']}, {data['y0']}, {data['x1']}, {data['y1']}): need x0 < x1 and y0 < y1"
            )
        return data
