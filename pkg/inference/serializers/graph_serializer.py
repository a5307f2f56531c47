from rest_framework import serializers

from inference.serializers.edge_serializer import EdgeSerializer
from inference.serializers.estimate_serializer import EstimateSummarySerializer
from inference.serializers.fields import SignificantFloatField


class GraphSerializer(serializers.Serializer):
    orientation = serializers.CharField()
    kind = serializers.CharField()
    names = serializers.ListField(child=serializers.CharField())
    adjacency = serializers.ListField(child=serializers.ListField(child=SignificantFloatField()))
    edges = EdgeSerializer(many=True)
    summary = EstimateSummarySerializer(required=False, allow_null=True)
