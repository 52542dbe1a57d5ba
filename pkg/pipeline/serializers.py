import math

from rest_framework import serializers

from extra_backend.conf import get_extra_setting
from tilt.types import SufficientStatistic


def _check_finite(values, message="must be finite"):
    if not all(math.isfinite(v) for v in values):
        raise serializers.ValidationError(message)
    return values


class MarketModelSerializer(serializers.Serializer):
    """Serializer for the simulated auction market"""

    feature_dim = serializers.IntegerField(min_value=1)
    utility_weights = serializers.ListField(child=serializers.FloatField())
    utility_bias = serializers.FloatField(default=0.0)
    price_loc_weights = serializers.ListField(child=serializers.FloatField())
    price_coupling = serializers.FloatField(default=0.0)
    price_scale = serializers.FloatField(default=1.0)
    bid = serializers.FloatField(default=1.0)
    feature_support = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), required=False, allow_empty=False,
    )
    support_probs = serializers.ListField(child=serializers.FloatField(min_value=0.0), required=False)

    def validate_utility_weights(self, value):
        return _check_finite(value)

    def validate_price_loc_weights(self, value):
        return _check_finite(value)

    def validate_price_scale(self, value):
        if not value > 0:
            raise serializers.ValidationError("price_scale must be positive.")
        return value

    def validate_bid(self, value):
        if not value > 0:
            raise serializers.ValidationError("bid must be positive.")
        return value

    def validate(self, attrs):
        d = attrs['feature_dim']
        errors = {}
        for name in ('utility_weights', 'price_loc_weights'):
            if len(attrs[name]) != d:
                errors[name] = f"has length {len(attrs[name])}, expected feature_dim={d}."
        support = attrs.get('feature_support')
        probs = attrs.get('support_probs')
        if support is not None:
            if any(len(row) != d for row in support):
                errors['feature_support'] = f"every support point must have {d} coordinates."
            if probs is not None and (len(probs) != len(support) or abs(sum(probs) - 1.0) > 1e-12):
                errors['support_probs'] = "must be a probability vector over the support points."
        elif probs is not None:
            errors['support_probs'] = "requires feature_support."
        if errors:
            raise serializers.ValidationError(errors)
        return attrs


class TrainConfigSerializer(serializers.Serializer):
    """Serializer for source classifier training"""

    learning_rate = serializers.FloatField(default=0.1)
    epochs = serializers.IntegerField(min_value=1, default=20)
    batch_size = serializers.IntegerField(min_value=1, default=256)
    l2_penalty = serializers.FloatField(min_value=0.0, default=0.0)
    seed = serializers.IntegerField(min_value=0, required=False)

    def validate_learning_rate(self, value):
        if not value > 0:
            raise serializers.ValidationError("learning_rate must be positive.")
        return value


class ExtraConfigSerializer(serializers.Serializer):
    """Serializer for the tilt fitting loop; the regularizer key is `lambda`"""

    learning_rate = serializers.FloatField(default=0.05)
    batch_size = serializers.IntegerField(min_value=1, default=256)
    max_steps = serializers.IntegerField(min_value=1, default=20000)
    tol = serializers.FloatField(default=1e-6)
    patience = serializers.IntegerField(min_value=1, default=20)
    seed = serializers.IntegerField(min_value=0, required=False)

    def get_fields(self):
        fields = super().get_fields()
        fields['lambda'] = serializers.FloatField(default=1.0, source='lam')
        return fields

    def _positive(self, value, name):
        if not value > 0:
            raise serializers.ValidationError(f"{name} must be positive.")
        return value

    def validate_learning_rate(self, value):
        return self._positive(value, 'learning_rate')

    def validate_tol(self, value):
        return self._positive(value, 'tol')

    def validate_lambda(self, value):
        return self._positive(value, 'lambda')


class SufficientStatisticSerializer(serializers.Serializer):
    """Serializer for the declared statistic T"""

    kind = serializers.ChoiceField(choices=SufficientStatistic.KINDS, default='identity')
    indices = serializers.ListField(child=serializers.IntegerField(min_value=0), required=False, allow_empty=False)
    matrix = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(), allow_empty=False),
        required=False, allow_empty=False,
    )
    offset = serializers.ListField(child=serializers.FloatField(), required=False)

    def validate(self, attrs):
        kind = attrs.get('kind', 'identity')
        if kind == 'subset' and not attrs.get('indices'):
            raise serializers.ValidationError({'indices': "subset statistic needs indices."})
        if kind == 'affine':
            matrix = attrs.get('matrix')
            if not matrix:
                raise serializers.ValidationError({'matrix': "affine statistic needs a matrix."})
            if len({len(row) for row in matrix}) != 1:
                raise serializers.ValidationError({'matrix': "rows must have equal length."})
            offset = attrs.get('offset')
            if offset is not None and len(offset) != len(matrix):
                raise serializers.ValidationError({'offset': f"must have {len(matrix)} entries."})
        return attrs


class RunConfigSerializer(serializers.Serializer):
    """Serializer for the complete run config document"""

    schema_version = serializers.IntegerField(required=False)
    market = MarketModelSerializer()
    train = TrainConfigSerializer(required=False)
    extra = ExtraConfigSerializer(required=False)
    statistic = SufficientStatisticSerializer(required=False)
    n_stream = serializers.IntegerField(min_value=1)
    n_oracle = serializers.IntegerField(min_value=1, default=200000)
    seed = serializers.IntegerField(min_value=0, default=0)
    out_dir = serializers.CharField(default='out')
    market_features = serializers.BooleanField(default=False)
    clip_epsilon = serializers.FloatField(default=1e-6)

    def validate_schema_version(self, value):
        expected = get_extra_setting('SCHEMA_VERSION')
        if value != expected:
            raise serializers.ValidationError(f"unsupported schema_version {value}; expected {expected}.")
        return value

    def validate_clip_epsilon(self, value):
        if not 0.0 < value < 0.5:
            raise serializers.ValidationError("clip_epsilon must lie in (0, 0.5).")
        return value

    def validate(self, attrs):
        d = attrs['market']['feature_dim'] + (2 if attrs.get('market_features') else 0)
        statistic = attrs.get('statistic') or {}
        kind = statistic.get('kind', 'identity')
        if kind == 'subset' and max(statistic['indices']) >= d:
            raise serializers.ValidationError(
                {'statistic': f"subset index {max(statistic['indices'])} out of range for {d} features."}
            )
        if kind == 'affine' and len(statistic['matrix'][0]) != d:
            raise serializers.ValidationError(
                {'statistic': f"affine matrix has {len(statistic['matrix'][0])} columns, expected {d}."}
            )
        return attrs
