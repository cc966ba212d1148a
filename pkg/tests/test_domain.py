import math

import pytest
from hypothesis import given, strategies as st

from carbonledger.domain import (
    CO2_PER_C,
    ConfigurationError,
    EmissionFactorSet,
    FlowRecord,
    FlowValidationError,
    HeatingValueSeries,
    Period,
    Quantity,
    SourceKind,
    Unit,
    UnitMismatchError,
    UnsupportedSourceError,
    aggregate_flows,
    carbon_from_co2,
    co2_from_carbon,
    convert_unit,
    flow_violations,
    validate_flow,
)

from conftest import make_flow

COAL_HV = HeatingValueSeries(fallback={SourceKind.COAL: 20.95})

finite = st.floats(min_value=-1e12, max_value=1e12, allow_nan=False, allow_infinity=False)
nonneg = st.floats(min_value=0, max_value=1e12, allow_nan=False, allow_infinity=False)


class TestPeriod:
    def test_annual_vs_monthly(self):
        assert Period(2018).annual
        assert not Period(2018, 10).annual
        assert str(Period(2018, 3)) == "2018-03"

    @pytest.mark.parametrize("month", [0, 13, -1])
    def test_month_range(self, month):
        with pytest.raises(ValueError):
            Period(2018, month)

    @pytest.mark.parametrize("year", [1900, 2200])
    def test_year_window(self, year):
        with pytest.raises(ValueError):
            Period(year)

    def test_previous_year_keeps_month(self):
        assert Period(2018, 10).previous_year() == Period(2017, 10)


class TestQuantity:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Quantity(float("nan"), Unit.TONNE)
        with pytest.raises(ValueError):
            Quantity(float("inf"), Unit.TJ)

    def test_unit_mismatch_arithmetic(self):
        with pytest.raises(UnitMismatchError):
            Quantity(1.0, Unit.TONNE) + Quantity(1.0, Unit.TJ)
        with pytest.raises(UnitMismatchError):
            Quantity(1.0, Unit.T_C) - Quantity(1.0, Unit.T_CO2)

    def test_scalar_multiplication(self):
        assert (2.5 * Quantity(4.0, Unit.TONNE)).magnitude == 10.0
        with pytest.raises(UnitMismatchError):
            Quantity(1.0, Unit.TONNE) * Quantity(1.0, Unit.TONNE)


class TestConvertUnit:
    def test_one_tonne_coal(self):
        q = convert_unit(Quantity(1.0, Unit.TONNE), SourceKind.COAL, 2018, COAL_HV)
        assert q.unit is Unit.TJ
        assert q.magnitude == pytest.approx(0.02095, rel=1e-12)

    def test_zero(self):
        q = convert_unit(Quantity(0.0, Unit.TONNE), SourceKind.COAL, 2005, COAL_HV)
        assert q.magnitude == 0.0

    def test_un_heating_value_megatonne(self):
        hv = HeatingValueSeries(fallback={SourceKind.COAL: 21.4})
        q = convert_unit(Quantity(1e6, Unit.TONNE), SourceKind.COAL, 2018, hv)
        assert q.magnitude == pytest.approx(21400.0, rel=1e-12)

    def test_cement_rejected(self):
        with pytest.raises(UnsupportedSourceError):
            convert_unit(Quantity(1.0, Unit.TONNE), SourceKind.CEMENT, 2018, COAL_HV)

    def test_wrong_unit_rejected(self):
        with pytest.raises(UnitMismatchError):
            convert_unit(Quantity(1.0, Unit.M3), SourceKind.COAL, 2018, COAL_HV)

    def test_sign_preserved(self):
        q = convert_unit(Quantity(-5.0, Unit.TONNE), SourceKind.COAL, 2018, COAL_HV)
        assert q.magnitude < 0

    @given(a=finite, b=finite, k=st.floats(min_value=-1e3, max_value=1e3, allow_nan=False))
    def test_linearity(self, a, b, k):
        def conv(x):
            return convert_unit(Quantity(x, Unit.TONNE), SourceKind.COAL, 2010, COAL_HV).magnitude

        assert conv(a) + conv(b) == pytest.approx(conv(a + b), rel=1e-9, abs=1e-6)
        assert k * conv(a) == pytest.approx(conv(k * a), rel=1e-9, abs=1e-6)


class TestCarbonConversion:
    def test_stoichiometric_identity(self):
        assert co2_from_carbon(Quantity(12.0, Unit.T_C)).magnitude == pytest.approx(44.0)

    def test_zero(self):
        assert co2_from_carbon(Quantity(0.0, Unit.T_C)).magnitude == 0.0

    def test_large_mass(self):
        # hand arithmetic: 5.125e8 * 44 / 12
        q = co2_from_carbon(Quantity(5.125e8, Unit.T_C))
        assert q.magnitude == pytest.approx(1.8791666666e9, abs=1e6)
        assert q.unit is Unit.T_CO2

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            co2_from_carbon(Quantity(-1.0, Unit.T_C))

    def test_unit_enforced(self):
        with pytest.raises(UnitMismatchError):
            co2_from_carbon(Quantity(1.0, Unit.TONNE))

    @given(y=st.floats(min_value=1e-30, max_value=1e30, allow_nan=False))
    def test_round_trip_within_one_ulp(self, y):
        back = co2_from_carbon(carbon_from_co2(Quantity(y, Unit.T_CO2))).magnitude
        assert abs(back - y) <= math.ulp(y)

    def test_ratio_constant(self):
        assert CO2_PER_C == 44.0 / 12.0


class TestValidateFlow:
    def test_negative_production(self):
        record = make_flow(production=-1.0)
        with pytest.raises(FlowValidationError) as err:
            validate_flow(record)
        assert any("negative production" in v for v in err.value.violations)

    def test_cement_carries_production_only(self):
        record = make_flow(source=SourceKind.CEMENT, imports=5.0)
        with pytest.raises(FlowValidationError) as err:
            validate_flow(record)
        assert any("cement carries production only" in v for v in err.value.violations)

    def test_well_formed_returned_unchanged(self):
        record = make_flow(production=100.0, imports=20.0, exports=10.0, stock_change=-3.0)
        assert validate_flow(record) is record

    def test_all_violations_reported(self):
        record = FlowRecord(
            period=Period(2017),
            source=SourceKind.COAL,
            production=Quantity(-1.0, Unit.TONNE),
            imports=Quantity(-2.0, Unit.TONNE),
            exports=Quantity(0.0, Unit.M3),
            stock_change=Quantity(0.0, Unit.TONNE),
            non_energy_use=Quantity(0.0, Unit.TONNE),
        )
        violations = flow_violations(record)
        assert len(violations) >= 3  # two signs plus a unit mismatch

    @given(
        production=nonneg,
        imports=nonneg,
        exports=nonneg,
        stock=finite,
        non_energy=nonneg,
    )
    def test_idempotent(self, production, imports, exports, stock, non_energy):
        record = make_flow(
            production=production,
            imports=imports,
            exports=exports,
            stock_change=stock,
            non_energy_use=non_energy,
        )
        once = validate_flow(record)
        assert validate_flow(once) is once


class TestHeatingValueSeries:
    def test_year_lookup_and_fallback(self, caplog):
        hv = HeatingValueSeries(
            fallback={SourceKind.COAL: 20.95},
            by_year={SourceKind.COAL: {2010: 21.1}},
        )
        assert hv.value(SourceKind.COAL, 2010) == 21.1
        with caplog.at_level("WARNING"):
            assert hv.value(SourceKind.COAL, 2030) == 20.95
        assert any("fallback" in r.message for r in caplog.records)

    def test_unconfigured_source(self):
        with pytest.raises(ConfigurationError):
            COAL_HV.value(SourceKind.OIL, 2018)

    def test_cement_never(self):
        with pytest.raises(UnsupportedSourceError):
            COAL_HV.value(SourceKind.CEMENT, 2018)
        with pytest.raises(UnsupportedSourceError):
            HeatingValueSeries(fallback={SourceKind.CEMENT: 1.0})

    def test_positive_values_required(self):
        with pytest.raises(ValueError):
            HeatingValueSeries(fallback={SourceKind.COAL: 0.0})
        with pytest.raises(ValueError):
            HeatingValueSeries(
                fallback={SourceKind.COAL: 20.95}, by_year={SourceKind.COAL: {2000: -1.0}}
            )

    def test_series_requires_fallback(self):
        with pytest.raises(ConfigurationError):
            HeatingValueSeries(fallback={}, by_year={SourceKind.COAL: {2000: 21.0}})


class TestEmissionFactorSet:
    def test_oxidation_range(self):
        for bad in (0.0, 1.2, -0.5):
            with pytest.raises(ValueError):
                EmissionFactorSet(
                    scenario_name="x",
                    v=COAL_HV,
                    c={SourceKind.COAL: 26.59},
                    o={SourceKind.COAL: bad},
                )

    def test_carbon_content_positive(self):
        with pytest.raises(ValueError):
            EmissionFactorSet(
                scenario_name="x", v=COAL_HV, c={SourceKind.COAL: 0.0}, o={SourceKind.COAL: 0.9}
            )

    def test_cement_factor_nonnegative(self):
        with pytest.raises(ValueError):
            EmissionFactorSet(
                scenario_name="x",
                v=COAL_HV,
                c={SourceKind.COAL: 26.59},
                o={SourceKind.COAL: 0.92},
                cement_factor=-0.1,
            )

    def test_name_required(self):
        with pytest.raises(ValueError):
            EmissionFactorSet(
                scenario_name="", v=COAL_HV, c={SourceKind.COAL: 26.59}, o={SourceKind.COAL: 0.92}
            )

    def test_missing_factor_lookup(self):
        factors = EmissionFactorSet(
            scenario_name="coal-only",
            v=COAL_HV,
            c={SourceKind.COAL: 26.59},
            o={SourceKind.COAL: 0.92},
        )
        with pytest.raises(ConfigurationError):
            factors.carbon_content(SourceKind.OIL)
        with pytest.raises(ConfigurationError):
            factors.oxidation(SourceKind.NATURAL_GAS)


class TestAggregateFlows:
    def test_field_wise_sum(self):
        a = make_flow(month=1, production=10.0, imports=1.0)
        b = make_flow(month=2, production=20.0, imports=2.0)
        total = aggregate_flows([a, b], period=Period(2017, 2))
        assert total.production.magnitude == 30.0
        assert total.imports.magnitude == 3.0
        assert total.period == Period(2017, 2)

    def test_cross_source_rejected(self):
        with pytest.raises(UnitMismatchError):
            aggregate_flows([make_flow(), make_flow(source=SourceKind.OIL)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_flows([])
