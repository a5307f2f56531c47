from rest_framework import serializers

from inference.serializers.fields import SignificantFloatField


class EstimateSummarySerializer(serializers.Serializer):
    model = serializers.CharField()
    rho = SignificantFloatField()
    converged = serializers.BooleanField()
    edge_count = serializers.IntegerField()
    residual = SignificantFloatField()
    xi = SignificantFloatField(required=False, allow_null=True)
    alpha = SignificantFloatField(required=False, allow_null=True)
    delta = SignificantFloatField(required=False, allow_null=True)
    epsilon = serializers.ListField(
        child=SignificantFloatField(), required=False, allow_null=True
    )
    recovered = serializers.BooleanField(required=False)
    support_agreement = SignificantFloatField(required=False, allow_null=True)
