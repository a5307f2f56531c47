from rest_framework import serializers

from inference.serializers.fields import SignificantFloatField


class RocPointSerializer(serializers.Serializer):
    fpr = SignificantFloatField()
    tpr = SignificantFloatField()
    threshold = SignificantFloatField(allow_null=True)


class RocSerializer(serializers.Serializer):
    auc = SignificantFloatField()
    n_positive = serializers.IntegerField()
    n_negative = serializers.IntegerField()
    points = RocPointSerializer(many=True)
