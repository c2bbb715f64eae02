# stability_lab/serializers.py
from dataclasses import replace

from rest_framework import serializers

from .models import (
    SystemId, SystemParams, SpaceKind, SpaceSpec, CoupledSystemSpec, InjectionKind,
    InjectionDescriptor, ObservationKind, ObservationTerm, ObservationDescriptor, Component,
    QuadratureRule, QuadratureSpec, RunConfig, AdmissibilityKind, AdmissibilityMethod
)
from .systems import SystemCatalog

INITIAL_STATES = ('random', 'zero', 'smooth')


class EnumField(serializers.ChoiceField):
    """ChoiceField over an Enum's values; internal values are Enum members"""

    def __init__(self, enum, **kwargs):
        self.enum = enum
        super().__init__(choices=[(member.value, member.value) for member in enum], **kwargs)

    def to_internal_value(self, data):
        if isinstance(data, self.enum):
            return data
        return self.enum(super().to_internal_value(data))

    def to_representation(self, value):
        if value in ('', None):
            return value
        return value.value if isinstance(value, self.enum) else value


class PairsField(serializers.DictField):
    """((name, value), ...) tuples shown as a JSON object"""
    child = serializers.FloatField()

    def to_internal_value(self, data):
        return tuple(super().to_internal_value(data).items())

    def to_representation(self, value):
        return super().to_representation(dict(value))


class SystemParamsSerializer(serializers.Serializer):
    c0 = serializers.FloatField(required=False, allow_null=True, default=None)
    c1 = serializers.FloatField(required=False, allow_null=True, default=None)
    c2 = serializers.FloatField(required=False, allow_null=True, default=None)
    c3 = serializers.FloatField(required=False, allow_null=True, default=None)
    q = serializers.FloatField(required=False, allow_null=True, default=None)

    def create(self, validated_data):
        return SystemParams(**validated_data)


class QuadratureSpecSerializer(serializers.Serializer):
    rule = EnumField(QuadratureRule, default=QuadratureRule.GAUSS_LEGENDRE)
    panels = serializers.IntegerField(min_value=1, default=64)
    nodes = serializers.IntegerField(min_value=1, max_value=32, default=4)

    def create(self, validated_data):
        return QuadratureSpec(**validated_data)


class RunConfigSerializer(serializers.Serializer):
    system = EnumField(SystemId)
    params = SystemParamsSerializer()
    n = serializers.IntegerField(min_value=4)
    t_end = serializers.FloatField()
    dt = serializers.FloatField()
    quad = QuadratureSpecSerializer()
    gamma_fraction = serializers.FloatField()
    output_dir = serializers.CharField()
    seed = serializers.IntegerField(min_value=0)
    initial_state = serializers.ChoiceField(choices=INITIAL_STATES)
    horizons = serializers.ListField(child=serializers.FloatField(), allow_empty=False)
    admissibility_steps = serializers.IntegerField(min_value=8)
    ladder = serializers.ListField(child=serializers.IntegerField(min_value=4), allow_empty=False)
    decay_t_max = serializers.FloatField()
    decay_t_points = serializers.IntegerField(min_value=4)
    verify_samples = serializers.IntegerField(min_value=1)
    tolerances = serializers.DictField(child=serializers.FloatField())
    export_matrices = serializers.BooleanField(default=False)

    def validate_t_end(self, value):
        if not value > 0:
            raise serializers.ValidationError("t_end must be > 0")
        return value

    def validate_dt(self, value):
        if not value > 0:
            raise serializers.ValidationError("dt must be > 0")
        return value

    def validate_gamma_fraction(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("gamma_fraction must lie in (0, 1)")
        return value

    def validate_horizons(self, value):
        if any(not t0 > 0 for t0 in value):
            raise serializers.ValidationError("Admissibility horizons must be > 0")
        return sorted(value)

    def validate_decay_t_max(self, value):
        if not value > 0:
            raise serializers.ValidationError("decay_t_max must be > 0")
        return value

    def validate(self, attrs):
        params = SystemParams(**attrs['params'])
        violations = SystemCatalog.validate_params(attrs['system'], params)
        if violations:
            raise serializers.ValidationError({'params': violations})
        return attrs

    def create(self, validated_data):
        data = dict(validated_data)
        data['params'] = SystemParams(**data['params'])
        data['quad'] = QuadratureSpec(**data['quad'])
        return RunConfig(**data)


class SpaceSpecSerializer(serializers.Serializer):
    kind = EnumField(SpaceKind)
    gains = PairsField()
    boundary_weights = PairsField(required=False, default=tuple)

    def create(self, validated_data):
        return SpaceSpec(**validated_data)


class InjectionDescriptorSerializer(serializers.Serializer):
    kind = EnumField(InjectionKind)
    location = serializers.FloatField(allow_null=True, required=False, default=None)
    scale = serializers.FloatField(default=1.0)
    amplitude = serializers.FloatField(default=1.0)
    rate = serializers.FloatField(default=0.0)


class ObservationTermSerializer(serializers.Serializer):
    kind = EnumField(ObservationKind)
    component = EnumField(Component)
    location = serializers.FloatField()
    gain = serializers.FloatField(default=1.0)


class ObservationDescriptorSerializer(serializers.Serializer):
    kind = EnumField(ObservationKind)
    terms = ObservationTermSerializer(many=True)


class CoupledSystemSpecSerializer(serializers.Serializer):
    system = EnumField(SystemId)
    params = SystemParamsSerializer()
    space1 = SpaceSpecSerializer()
    space2 = SpaceSpecSerializer()
    injection = InjectionDescriptorSerializer(many=True)
    observation = ObservationDescriptorSerializer(many=True)
    coupling_channels = serializers.IntegerField(min_value=1)
    description = serializers.CharField(allow_blank=True, required=False, default='')

    def validate(self, attrs):
        spec = self._build(attrs)
        violations = SystemCatalog.validate_params(spec.system, spec.params)
        if violations:
            raise serializers.ValidationError({'params': violations})
        expected = SystemCatalog.catalog_lookup(spec.system, spec.params)
        if replace(spec, description=expected.description) != expected:
            raise serializers.ValidationError(
                f"Spaces, operators or channel count do not match the {spec.system.value} catalog entry"
            )
        return attrs

    @staticmethod
    def _build(attrs) -> CoupledSystemSpec:
        return CoupledSystemSpec(
            system=attrs['system'],
            params=SystemParams(**attrs['params']),
            space1=SpaceSpec(**attrs['space1']),
            space2=SpaceSpec(**attrs['space2']),
            injection=tuple(InjectionDescriptor(**item) for item in attrs['injection']),
            observation=tuple(
                ObservationDescriptor(
                    kind=item['kind'],
                    terms=tuple(ObservationTerm(**term) for term in item['terms'])
                )
                for item in attrs['observation']
            ),
            coupling_channels=attrs['coupling_channels'],
            description=attrs.get('description', ''),
        )

    def create(self, validated_data):
        return self._build(validated_data)


class SystemEntrySerializer(serializers.Serializer):
    system = EnumField(SystemId)
    description = serializers.CharField()
    required_params = serializers.ListField(child=serializers.CharField())
    coupling_channels = serializers.IntegerField(min_value=1)


class AdmissibilityEstimateSerializer(serializers.Serializer):
    t0 = serializers.FloatField(allow_null=True)
    value = serializers.FloatField(min_value=0.0)
    kind = EnumField(AdmissibilityKind)
    method = EnumField(AdmissibilityMethod)
    time_steps = serializers.IntegerField(min_value=0)


class AdmissibilityReportSerializer(serializers.Serializer):
    system = EnumField(SystemId)
    n = serializers.IntegerField(min_value=4)
    control = AdmissibilityEstimateSerializer(many=True)
    observation = AdmissibilityEstimateSerializer(many=True)
    control_limit = AdmissibilityEstimateSerializer()
    observation_limit = AdmissibilityEstimateSerializer()
    config = serializers.DictField()


class DecayCertificateSerializer(serializers.Serializer):
    system = serializers.CharField()
    m_a1 = serializers.FloatField()
    omega_a1 = serializers.FloatField()
    m_a2 = serializers.FloatField()
    omega_a2 = serializers.FloatField()
    k_const = serializers.FloatField(min_value=0.0)
    n_const = serializers.FloatField(min_value=0.0)
    k1_const = serializers.FloatField(min_value=0.0)
    n1_const = serializers.FloatField(min_value=0.0)
    gamma = serializers.FloatField()
    gamma_fraction = serializers.FloatField()
    bound_const = serializers.FloatField()
    norm_factor = serializers.FloatField()
    saturation_horizon_control = serializers.FloatField()
    saturation_horizon_observation = serializers.FloatField()
    verdict = serializers.BooleanField()
    max_ratio = serializers.FloatField()
    t_grid = serializers.ListField(child=serializers.FloatField())
    coupled_norms = serializers.ListField(child=serializers.FloatField())
    envelope = serializers.ListField(child=serializers.FloatField())
    config = serializers.DictField(required=False)

    def validate(self, attrs):
        if not 0 < attrs['gamma'] < min(attrs['omega_a1'], attrs['omega_a2']):
            raise serializers.ValidationError("gamma must lie strictly below both decay rates")
        if attrs['bound_const'] < attrs['m_a2']:
            raise serializers.ValidationError("bound_const must dominate m_a2")
        return attrs


class SpectrumReportSerializer(serializers.Serializer):
    system = EnumField(SystemId)
    n = serializers.IntegerField(min_value=4)
    dimension = serializers.IntegerField(min_value=1)
    abscissa = serializers.FloatField()
    abscissa_first = serializers.FloatField()
    abscissa_second = serializers.FloatField()
    gap_to_axis = serializers.FloatField()
    config = serializers.DictField()


class VerifyCheckSerializer(serializers.Serializer):
    name = serializers.CharField()
    tolerance = serializers.FloatField()
    residual = serializers.FloatField()
    samples = serializers.IntegerField(min_value=0)
    passed = serializers.BooleanField()


class VerifyReportSerializer(serializers.Serializer):
    system = EnumField(SystemId)
    n = serializers.IntegerField(min_value=4)
    seed = serializers.IntegerField()
    passed = serializers.BooleanField()
    checks = VerifyCheckSerializer(many=True)
    config = serializers.DictField()

    def validate(self, attrs):
        if attrs['passed'] != all(check['passed'] for check in attrs['checks']):
            raise serializers.ValidationError("passed must equal the conjunction of all checks")
        return attrs
