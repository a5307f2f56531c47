from rest_framework import serializers

from inference.serializers.fields import SignificantFloatField


class EdgeSerializer(serializers.Serializer):
    source = serializers.CharField()
    target = serializers.CharField()
    weight = SignificantFloatField()
    sign_violation = serializers.BooleanField()
