"""
Run configuration serializers.
Validates JSON run documents; every nesting level rejects unknown keys.
"""

from dataclasses import asdict

from rest_framework import serializers

from .channel import (
    BAND_PLAN,
    DEFAULT_NOISE_FIGURE_DB,
    SITE_PRESETS,
    ChannelProfile,
    FadingParams,
    Scenario,
    profile_radio_defaults,
)
from .geo import SITE_CLASSES

SITE_TYPES = sorted(SITE_PRESETS)
CARRIERS_MHZ = sorted(BAND_PLAN)
SCENARIOS = [scenario.value for scenario in Scenario]
PROFILES = [profile.value for profile in ChannelProfile]
RADIUS_CLASSES = sorted(set(SITE_CLASSES.values()))


class StrictSerializer(serializers.Serializer):
    """Serializer that rejects keys it does not declare."""

    def to_internal_value(self, data):
        if isinstance(data, dict):
            unknown = sorted(set(data) - set(self.fields))
            if unknown:
                raise serializers.ValidationError(
                    {key: ["Unknown field."] for key in unknown}
                )
        return super().to_internal_value(data)

    def fill_sections(self, attrs, names):
        """Validate an empty document for every nested section left out."""
        for name in names:
            if name not in attrs:
                attrs[name] = self.fields[name].run_validation({})
        return attrs


class ArraySerializer(StrictSerializer):
    m_h = serializers.IntegerField(min_value=1, default=32)
    m_v = serializers.IntegerField(min_value=1, default=8)
    spacing = serializers.FloatField(min_value=0.0, default=0.5)

    def validate_spacing(self, value):
        if value <= 0:
            raise serializers.ValidationError("Element spacing must be positive.")
        return value


class RadioSerializer(StrictSerializer):
    cp_overhead = serializers.FloatField(min_value=0.0, max_value=0.99, default=0.05)
    noise_figure_db = serializers.FloatField(required=False)
    target_rate_mbps = serializers.FloatField(min_value=0.0, default=10.0)


class SiteSerializer(StrictSerializer):
    """Overrides of one site type; gaps are filled from its preset."""

    tx_height_m = serializers.FloatField(required=False)
    tx_power_w = serializers.FloatField(required=False)
    scenario = serializers.ChoiceField(choices=SCENARIOS, required=False)

    def validate(self, attrs):
        for name in ("tx_height_m", "tx_power_w"):
            if name in attrs and attrs[name] <= 0:
                raise serializers.ValidationError({name: ["Must be positive."]})
        return attrs


class SitesSerializer(StrictSerializer):
    legacy = SiteSerializer(required=False)
    high_tower = SiteSerializer(required=False)

    def validate(self, attrs):
        resolved = {}
        for site_type in SITE_TYPES:
            preset = SITE_PRESETS[site_type]
            values = {
                "tx_height_m": preset.tx_height_m,
                "tx_power_w": preset.tx_power_w,
                "scenario": Scenario(preset.scenario).value,
            }
            values.update(attrs.get(site_type, {}))
            resolved[site_type] = values
        return resolved


class FadingSerializer(StrictSerializer):
    rician_k_mean_db = serializers.FloatField(required=False)
    rician_k_std_db = serializers.FloatField(min_value=0.0, required=False)
    n_clusters = serializers.IntegerField(min_value=1, required=False)
    azimuth_spread_deg = serializers.FloatField(min_value=0.0, required=False)
    zenith_spread_deg = serializers.FloatField(min_value=0.0, required=False)
    xpr_mean_db = serializers.FloatField(required=False)
    shadow_sigma_db = serializers.FloatField(min_value=0.0, required=False)
    shadow_sigma_far_db = serializers.FloatField(
        min_value=0.0, required=False, allow_null=True
    )


class FadingOverridesSerializer(StrictSerializer):
    legacy = FadingSerializer(required=False)
    high_tower = FadingSerializer(required=False)


class SweepSerializer(StrictSerializer):
    site_types = serializers.ListField(
        child=serializers.ChoiceField(choices=SITE_TYPES),
        allow_empty=False,
        default=lambda: list(SITE_TYPES),
    )
    users = serializers.ListField(
        child=serializers.IntegerField(min_value=1),
        allow_empty=False,
        default=lambda: [20, 50, 100],
    )
    carriers_mhz = serializers.ListField(
        child=serializers.ChoiceField(choices=CARRIERS_MHZ),
        allow_empty=False,
        default=lambda: list(CARRIERS_MHZ),
    )
    polarizations = serializers.ListField(
        child=serializers.ChoiceField(choices=[1, 2]),
        allow_empty=False,
        default=lambda: [1, 2],
    )

    def validate(self, attrs):
        # Sorted and deduplicated so equivalent sweeps resolve identically
        return {name: sorted(set(values)) for name, values in attrs.items()}


class CoverageSerializer(StrictSerializer):
    trials = serializers.IntegerField(min_value=1, default=100)
    satisfaction_threshold = serializers.FloatField(default=0.95)
    distance_grid_km = serializers.FloatField(default=0.1)
    max_distance_km = serializers.FloatField(default=100.0)
    rx_height_m = serializers.FloatField(min_value=1.0, max_value=10.0, default=8.0)

    def validate_satisfaction_threshold(self, value):
        if not 0 < value < 1:
            raise serializers.ValidationError("Threshold must lie in (0, 1).")
        return value

    def validate(self, attrs):
        if attrs["distance_grid_km"] <= 0:
            raise serializers.ValidationError(
                {"distance_grid_km": ["Must be positive."]}
            )
        if attrs["max_distance_km"] < attrs["distance_grid_km"]:
            raise serializers.ValidationError(
                {"max_distance_km": ["Must be at least one grid step."]}
            )
        return attrs


class ChannelDumpSerializer(StrictSerializer):
    site_type = serializers.ChoiceField(choices=SITE_TYPES, default="high_tower")
    carrier_mhz = serializers.ChoiceField(choices=CARRIERS_MHZ, default=700)
    polarizations = serializers.ChoiceField(choices=[1, 2], default=1)
    num_users = serializers.IntegerField(min_value=1, default=20)
    distance_km = serializers.FloatField(min_value=0.0, default=1.0)


class ScenarioParamsSerializer(StrictSerializer):
    active_fraction_low = serializers.FloatField(default=0.01)
    active_fraction_high = serializers.FloatField(default=0.02)
    adoption_rate = serializers.FloatField(default=0.02)
    active_share_of_subscribers = serializers.FloatField(default=1 / 20)

    def validate(self, attrs):
        for name, value in attrs.items():
            if not 0 < value <= 1:
                raise serializers.ValidationError({name: ["Must lie in (0, 1]."]})
        if attrs["active_fraction_low"] > attrs["active_fraction_high"]:
            raise serializers.ValidationError(
                {"active_fraction_low": ["Must not exceed active_fraction_high."]}
            )
        return attrs


class RelocateSerializer(StrictSerializer):
    n_towers = serializers.IntegerField(min_value=0, default=3)
    radius_km = serializers.FloatField(min_value=0.0, required=False, allow_null=True)

    def validate(self, attrs):
        attrs.setdefault("radius_km", None)
        return attrs


class GeoSerializer(StrictSerializer):
    radii = serializers.DictField(
        child=serializers.FloatField(min_value=0.0), default=dict
    )
    coverage_csv = serializers.CharField(required=False, allow_null=True)
    coverage_run = serializers.IntegerField(required=False, allow_null=True)
    carrier_mhz = serializers.ChoiceField(choices=CARRIERS_MHZ, default=700)
    polarizations = serializers.ChoiceField(choices=[1, 2], default=2)
    num_users = serializers.IntegerField(min_value=1, default=20)
    load_based = serializers.BooleanField(default=False)
    geojson_segments = serializers.IntegerField(min_value=3, default=64)
    scenario = ScenarioParamsSerializer(required=False)
    relocate = RelocateSerializer(required=False)

    def validate_radii(self, value):
        unknown = sorted(set(value) - set(RADIUS_CLASSES))
        if unknown:
            raise serializers.ValidationError(
                f"Unknown site classes {unknown} (known: {RADIUS_CLASSES})."
            )
        return value

    def validate(self, attrs):
        if attrs.get("coverage_csv") and attrs.get("coverage_run"):
            raise serializers.ValidationError(
                "Give either coverage_csv or coverage_run, not both."
            )
        attrs.setdefault("coverage_csv", None)
        attrs.setdefault("coverage_run", None)
        return self.fill_sections(attrs, ("scenario", "relocate"))


class RunConfigSerializer(StrictSerializer):
    """Top-level run document. Defaults reproduce the tower study setup."""

    SECTIONS = (
        "array",
        "radio",
        "sites",
        "fading",
        "sweep",
        "coverage",
        "channel_dump",
        "geo",
    )

    seed = serializers.IntegerField(min_value=0, required=False)
    profile = serializers.ChoiceField(
        choices=PROFILES, default=ChannelProfile.CALIBRATED.value
    )
    jobs = serializers.IntegerField(min_value=1, required=False)
    out_dir = serializers.CharField(required=False)
    array = ArraySerializer(required=False)
    radio = RadioSerializer(required=False)
    sites = SitesSerializer(required=False)
    fading = FadingOverridesSerializer(required=False)
    sweep = SweepSerializer(required=False)
    coverage = CoverageSerializer(required=False)
    channel_dump = ChannelDumpSerializer(required=False)
    geo = GeoSerializer(required=False)

    def validate(self, attrs):
        attrs = self.fill_sections(attrs, self.SECTIONS)
        profile = attrs["profile"]
        attrs["radio"] = {
            "noise_figure_db": DEFAULT_NOISE_FIGURE_DB,
            **profile_radio_defaults(profile),
            **attrs["radio"],
        }
        # Fading defaults follow the scenario each site ends up with
        attrs["fading"] = {
            site_type: asdict(
                FadingParams.for_scenario(
                    site["scenario"], profile, **attrs["fading"].get(site_type, {})
                )
            )
            for site_type, site in attrs["sites"].items()
        }
        return attrs
