from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class MaterialParams:
    """
    Material constants of the memory and filter crystals.

    Frequencies and rates are in Hz, times in s, depths dimensionless.
    ``reservoir_splitting`` (g3 to g5) is only read by the preparation model.
    """

    d: float = 0.6
    d_fc: float = 6.6
    gamma13: float = 5.6e3
    gamma35bar: float = 18.6e3
    gamma_opt: float = 12.0e3
    t1_excited: float = 1.9e-3
    opt_inhomogeneous_fwhm: float = 0.7e9
    branching_e3_to_g3: float = 0.5
    reservoir_splitting: float = 46.2e6

    @classmethod
    def field_names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def with_changes(self, **changes: float) -> "MaterialParams":
        return replace(self, **changes)

    def ideal(self) -> "MaterialParams":
        """Same depths, with every dephasing and decay switched off."""
        return replace(
            self,
            gamma13=0.0,
            gamma35bar=0.0,
            gamma_opt=0.0,
            t1_excited=float("inf"),
        )
