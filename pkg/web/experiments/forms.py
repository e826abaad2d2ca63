"""
One form per table of an experiment file.

Values arrive already typed from TOML; the forms coerce, range-check and fill
defaults from each field's ``initial``. Times are given in μs or ns as the
field name says and converted to seconds by the config layer.
"""

from django import forms

from physmodel.material import MaterialParams
from protocols.efficiency import DECAY_VARIABLES
from protocols.exceptions import NonMonotoneTimings
from protocols.sequences import (
    FLE4,
    NLPE,
    PE2,
    QUBIT,
    REFERENCE_TIMINGS,
    ROSE,
    NlpeTimings,
)

EXPERIMENT_KINDS = ("nlpe", "qubit", "decay", "rose", "afc")
PROFILE_KINDS = ("gaussian", "prepared")
OUTPUT_FORMATS = ("csv", "json")

# Protocol tags each experiment accepts in [sequence].
EXPERIMENT_PROTOCOLS = {
    "nlpe": (NLPE, FLE4, PE2, ROSE),
    "qubit": (QUBIT,),
    "decay": (NLPE,),
    "rose": (NLPE,),
    "afc": (NLPE,),
}


def _choices(values) -> list[tuple[str, str]]:
    return [(value, value) for value in values]


def _us(seconds: float) -> float:
    return seconds * 1e6


class ModelSectionForm(forms.Form):
    """[model]: an optional model file plus material overrides."""

    file = forms.CharField(required=False)
    d = forms.FloatField(required=False, min_value=0)
    d_fc = forms.FloatField(required=False, min_value=0)
    gamma13 = forms.FloatField(required=False)
    gamma35bar = forms.FloatField(required=False)
    gamma_opt = forms.FloatField(required=False)
    t1_excited = forms.FloatField(required=False)
    opt_inhomogeneous_fwhm = forms.FloatField(required=False)
    branching_e3_to_g3 = forms.FloatField(required=False)
    reservoir_splitting = forms.FloatField(required=False)

    def overrides(self) -> dict[str, float]:
        names = MaterialParams.field_names()
        return {
            key: value
            for key, value in self.cleaned_data.items()
            if key in names and value is not None
        }


class SequenceSectionForm(forms.Form):
    """[sequence]: protocol tag, pulse centers and window widths."""

    # defaults to the first protocol the experiment accepts
    protocol = forms.ChoiceField(choices=_choices((NLPE, QUBIT, FLE4, PE2, ROSE)))
    t0_us = forms.FloatField(initial=_us(REFERENCE_TIMINGS.t0))
    t1_us = forms.FloatField(initial=_us(REFERENCE_TIMINGS.t1))
    t2_us = forms.FloatField(initial=_us(REFERENCE_TIMINGS.t2))
    t3_us = forms.FloatField(initial=_us(REFERENCE_TIMINGS.t3))
    t4_us = forms.FloatField(initial=_us(REFERENCE_TIMINGS.t4))
    window_us = forms.FloatField(initial=1.57, min_value=1e-3)
    delta_t_us = forms.FloatField(initial=1.6, min_value=1e-3)

    def clean(self):
        cleaned_data = super().clean()
        names = ("t0_us", "t1_us", "t2_us", "t3_us", "t4_us")
        if all(name in cleaned_data for name in names):
            try:
                NlpeTimings(*(cleaned_data[name] * 1e-6 for name in names))
            except NonMonotoneTimings as e:
                raise forms.ValidationError(str(e)) from e
        return cleaned_data


class RunSectionForm(forms.Form):
    """[run]: what to run and with how many trials."""

    experiment = forms.ChoiceField(choices=_choices(EXPERIMENT_KINDS))
    trials = forms.IntegerField(initial=50_000, min_value=1)
    seed = forms.IntegerField(initial=0, min_value=0, max_value=2**64 - 1)
    bin_width_ns = forms.FloatField(initial=262.0, min_value=1e-3)
    mu = forms.FloatField(initial=1.17, min_value=0)
    eta_control = forms.FloatField(initial=0.938, min_value=0, max_value=1)
    dark_counts = forms.FloatField(initial=0.0, min_value=0)
    calibrate_branching = forms.BooleanField(initial=False, required=False)
    ions = forms.IntegerField(initial=0, min_value=0)
    grid_step_ns = forms.FloatField(initial=20.0, min_value=1e-3)
    profile = forms.ChoiceField(choices=_choices(PROFILE_KINDS), initial="gaussian")
    profile_fwhm_khz = forms.FloatField(initial=700.0, min_value=1e-3)
    vary = forms.ChoiceField(choices=_choices(DECAY_VARIABLES), initial="tau2")
    delay_start_us = forms.FloatField(initial=10.0, min_value=1e-3)
    delay_stop_us = forms.FloatField(initial=100.0, min_value=1e-3)
    points = forms.IntegerField(initial=12, min_value=2)
    phase_steps = forms.IntegerField(initial=8, min_value=3)
    response_prob = forms.FloatField(initial=0.030, min_value=0, max_value=1)

    def clean_response_prob(self):
        value = self.cleaned_data["response_prob"]
        if value == 0:
            raise forms.ValidationError("response probability must be positive")
        return value

    def clean(self):
        cleaned_data = super().clean()
        start = cleaned_data.get("delay_start_us")
        stop = cleaned_data.get("delay_stop_us")
        if start is not None and stop is not None and stop <= start:
            self.add_error("delay_stop_us", "must be larger than delay_start_us")
        return cleaned_data


class OutputSectionForm(forms.Form):
    """[output]: where artifacts go and which table formats are written."""

    directory = forms.CharField(required=False)
    formats = forms.MultipleChoiceField(
        choices=_choices(OUTPUT_FORMATS), initial=list(OUTPUT_FORMATS)
    )


SECTION_FORMS: dict[str, type[forms.Form]] = {
    "model": ModelSectionForm,
    "sequence": SequenceSectionForm,
    "run": RunSectionForm,
    "output": OutputSectionForm,
}

NUMERIC_FIELDS = (forms.FloatField, forms.IntegerField)
