"""Config schema: strict validation, dotted error paths, stable digests."""

import json

import pytest

from plaplab.config import (
    KINDS,
    canonical_digest,
    load_config,
    parse_config,
)
from plaplab.errors import ConfigurationError


def elliptic_cfg(**over):
    base = {
        "kind": "elliptic",
        "grid": {"box": [[-1.0, 1.0], [-1.0, 1.0]], "counts": [33, 33]},
        "p": 2.0,
        "data": {"preset": "pressed_ramp"},
    }
    base.update(over)
    return base


def growth_cfg(**over):
    base = {
        "kind": "growth",
        "grid": {"box": [[-1.0, 2.0]], "counts": [129]},
        "p": 3.0,
        "data": {"preset": "pressed_ramp"},
        "measure": {"anchor": [0.0]},
    }
    base.update(over)
    return base


def parabolic_cfg(**over):
    base = {
        "kind": "parabolic",
        "grid": {"box": [[-1.0, 2.0]], "counts": [65]},
        "p": 3.0,
        "data": {"exact": "parabolic_halfspace"},
        "time": {"t0": 0.0, "dt": 0.01, "steps": 5},
    }
    base.update(over)
    return base


def raises_with(cfg, fragment):
    with pytest.raises(ConfigurationError) as info:
        parse_config(cfg)
    assert fragment in str(info.value), str(info.value)


class TestDigest:
    def test_key_order_is_irrelevant(self):
        a = {"kind": "elliptic", "p": 2.0}
        b = {"p": 2.0, "kind": "elliptic"}
        assert canonical_digest(a) == canonical_digest(b)

    def test_value_changes_digest(self):
        a = elliptic_cfg()
        b = elliptic_cfg(p=2.5)
        assert parse_config(a).digest != parse_config(b).digest

    def test_whitespace_in_file_is_irrelevant(self, tmp_path):
        cfg = elliptic_cfg()
        tight = tmp_path / "tight.json"
        tight.write_text(json.dumps(cfg, separators=(",", ":")))
        airy = tmp_path / "airy.json"
        airy.write_text(json.dumps(cfg, indent=4) + "\n")
        assert load_config(tight).digest == load_config(airy).digest

    def test_nested_reorder_is_irrelevant(self):
        a = elliptic_cfg(solver={"outer_tol": 1e-8, "omega": 1.5})
        b = elliptic_cfg(solver={"omega": 1.5, "outer_tol": 1e-8})
        assert parse_config(a).digest == parse_config(b).digest


class TestTopLevel:
    def test_kind_required(self):
        raises_with({}, "kind")

    def test_unknown_kind_lists_choices(self):
        with pytest.raises(ConfigurationError) as info:
            parse_config({"kind": "heat"})
        for kind in KINDS:
            assert kind in str(info.value)

    def test_unknown_top_key_path(self):
        raises_with(elliptic_cfg(mesh={}), "mesh: unknown key")

    def test_section_requirements_per_kind(self):
        raises_with({"kind": "elliptic", "p": 2.0}, "missing required key")
        raises_with({"kind": "growth", **elliptic_cfg(kind="growth")}, "measure")
        raises_with({"kind": "oracle"}, "oracle")

    def test_p_floor_message(self):
        raises_with(elliptic_cfg(p=0.5), "p must exceed 1, got 0.5")
        raises_with(elliptic_cfg(p=1), "p must exceed 1")

    def test_p_must_be_a_number(self):
        raises_with(elliptic_cfg(p="three"), "expected a number")
        raises_with(elliptic_cfg(p=True), "expected a number")

    def test_threads_and_seed_floors(self):
        raises_with(elliptic_cfg(threads=0), "threads")
        raises_with(elliptic_cfg(seed=-1), "seed")

    def test_levels_only_for_convergence(self):
        raises_with(elliptic_cfg(levels=3), "levels: unknown key")
        cfg = parse_config(
            {
                "kind": "convergence",
                "grid": {"box": [[0.0, 3.0]], "counts": [33]},
                "p": 2.0,
                "data": {"preset": "halfspace_ramp"},
                "levels": 4,
            }
        )
        assert cfg.levels == 4


class TestGridSection:
    def test_build_round_trip(self):
        cfg = parse_config(elliptic_cfg())
        grid = cfg.grid.build()
        assert grid.counts == (33, 33)
        assert grid.domain.lo == (-1.0, -1.0)

    def test_box_pair_errors(self):
        raises_with(
            elliptic_cfg(grid={"box": [[1.0, -1.0], [-1.0, 1.0]], "counts": [9, 9]}),
            "grid.box[0]",
        )
        raises_with(
            elliptic_cfg(grid={"box": [[0.0], [0.0, 1.0]], "counts": [9, 9]}),
            "expected a [lo, hi] pair",
        )

    def test_three_dimensional_box_rejected(self):
        raises_with(
            elliptic_cfg(
                grid={"box": [[0, 1], [0, 1], [0, 1]], "counts": [5, 5, 5]}
            ),
            "only 1D and 2D",
        )

    def test_counts_validation(self):
        raises_with(
            elliptic_cfg(grid={"box": [[0.0, 1.0]], "counts": [9, 9]}),
            "expected 1 node count",
        )
        raises_with(
            elliptic_cfg(grid={"box": [[0.0, 1.0]], "counts": [1]}),
            "grid.counts[0]",
        )

    def test_unknown_grid_key(self):
        raises_with(
            elliptic_cfg(grid={"box": [[0.0, 1.0]], "counts": [9], "h": 0.1}),
            "grid.h: unknown key",
        )


class TestDataSection:
    def test_exactly_one_mode(self):
        raises_with(
            elliptic_cfg(data={"preset": "dome", "exact": "elliptic_halfspace"}),
            "exactly one",
        )
        raises_with(
            elliptic_cfg(data={"preset": "dome", "obstacle": "0"}),
            "exactly one",
        )

    def test_unknown_preset_name(self):
        raises_with(elliptic_cfg(data={"preset": "volcano"}), "data.preset")

    def test_preset_params_must_be_numbers(self):
        raises_with(
            elliptic_cfg(data={"preset": "dome", "params": {"height": "tall"}}),
            "data.params.height",
        )

    def test_preset_rejected_for_parabolic(self):
        raises_with(
            parabolic_cfg(data={"preset": "pressed_ramp"}),
            "presets are time-independent",
        )

    def test_exact_kind_must_match_time_dependence(self):
        raises_with(
            elliptic_cfg(data={"exact": "barenblatt"}, p=3.0),
            "needs a time-dependent problem kind",
        )
        raises_with(
            parabolic_cfg(data={"exact": "elliptic_halfspace"}),
            "not a time-dependent solution",
        )

    def test_exact_entry_validated_eagerly(self):
        raises_with(parabolic_cfg(data={"exact": "source_type"}, p=2.0), "data")

    def test_expression_parse_error_carries_offset(self):
        raises_with(
            elliptic_cfg(data={"obstacle": "x +", "boundary": "0"}),
            "bad expression at offset",
        )

    def test_time_variable_rejected_when_static(self):
        raises_with(
            elliptic_cfg(data={"obstacle": "t * x", "boundary": "0"}),
            "variable 't' is not allowed in a time-independent problem",
        )

    def test_second_coordinate_rejected_in_1d(self):
        raises_with(
            growth_cfg(data={"obstacle": "y", "boundary": "0"}),
            "variable 'y' is not allowed on a 1D grid",
        )

    def test_time_variable_allowed_when_parabolic(self):
        cfg = parse_config(
            parabolic_cfg(data={"obstacle": "t - 1", "boundary": "t"})
        )
        assert cfg.data.mode == "expressions"

    def test_rhs_rejected_for_time_dependent(self):
        raises_with(
            parabolic_cfg(data={"obstacle": "0 - 1", "boundary": "0", "rhs": "1"}),
            "data.rhs",
        )

    def test_initial_needs_time_dependence(self):
        raises_with(
            elliptic_cfg(data={"obstacle": "0 - 1", "boundary": "0", "initial": "0"}),
            "data.initial",
        )

    def test_gradient_component_count(self):
        raises_with(
            elliptic_cfg(
                data={"obstacle": "0 - 1", "boundary": "0", "gradient": ["0"]}
            ),
            "expected 2 component expression",
        )

    def test_beta_range(self):
        raises_with(
            growth_cfg(data={"obstacle": "0 - 1", "boundary": "0", "beta": 1.5}),
            "data.beta",
        )
        raises_with(
            growth_cfg(data={"obstacle": "0 - 1", "boundary": "0", "beta": 0.0}),
            "data.beta",
        )


class TestSolverSection:
    def test_defaults(self):
        cfg = parse_config(elliptic_cfg())
        assert cfg.solver.omega == 1.0
        assert cfg.solver.sweep_order == "lexicographic"
        assert cfg.solver.continuation_levels == 1

    def test_omega_parsing_and_range(self):
        cfg = parse_config(elliptic_cfg(solver={"omega": 1.95}))
        assert cfg.solver.omega == 1.95
        raises_with(elliptic_cfg(solver={"omega": 0.0}), "solver.omega")
        raises_with(elliptic_cfg(solver={"omega": 2.0}), "omega must lie in (0, 2)")

    def test_enumerated_choices(self):
        raises_with(elliptic_cfg(solver={"sweep_order": "spiral"}), "solver.sweep_order")
        raises_with(elliptic_cfg(solver={"seed_field": "random"}), "solver.seed_field")

    def test_unknown_solver_key(self):
        raises_with(elliptic_cfg(solver={"relaxation": 1.5}), "solver.relaxation")

    def test_tolerance_floors(self):
        raises_with(elliptic_cfg(solver={"outer_tol": 0.0}), "solver.outer_tol")
        raises_with(elliptic_cfg(solver={"max_sweeps": 0}), "solver.max_sweeps")


class TestTimeSection:
    def test_dt_xor_t_end(self):
        raises_with(
            parabolic_cfg(time={"t0": 0.0, "steps": 4}), "exactly one of 'dt' or 't_end'"
        )
        raises_with(
            parabolic_cfg(time={"t0": 0.0, "dt": 0.1, "t_end": 1.0, "steps": 4}),
            "exactly one of 'dt' or 't_end'",
        )

    def test_t_end_conversion(self):
        cfg = parse_config(parabolic_cfg(time={"t0": 1.0, "t_end": 2.0, "steps": 4}))
        assert cfg.time.dt == pytest.approx(0.25)
        tg = cfg.time.build()
        assert tg.horizon == pytest.approx(1.0)

    def test_t_end_must_exceed_t0(self):
        raises_with(
            parabolic_cfg(time={"t0": 2.0, "t_end": 1.0, "steps": 4}), "time.t_end"
        )

    def test_growth_turns_time_dependent_with_time(self):
        static = parse_config(growth_cfg())
        assert not static.time_dependent
        timed = parse_config(
            growth_cfg(
                data={"exact": "parabolic_halfspace"},
                time={"t0": 0.0, "dt": 0.001, "steps": 5},
            )
        )
        assert timed.time_dependent


class TestMeasureSection:
    def test_anchor_dimension(self):
        raises_with(growth_cfg(measure={"anchor": [0.0, 0.0]}), "measure.anchor")

    def test_radii_count_floor(self):
        raises_with(
            growth_cfg(measure={"anchor": [0.0], "radii_count": 3}),
            "measure.radii_count",
        )

    def test_gradient_source_choices(self):
        raises_with(
            growth_cfg(measure={"anchor": [0.0], "gradient_source": "magic"}),
            "measure.gradient_source",
        )

    def test_s_time_only_for_time_dependent_growth(self):
        raises_with(
            growth_cfg(measure={"anchor": [0.0], "s_time": 0.5}),
            "measure.s_time: unknown key",
        )

    def test_blowup_flag(self):
        cfg = parse_config(growth_cfg(measure={"anchor": [0.0], "blowup": True}))
        assert cfg.measure.blowup is True

    def test_porosity_measure_keys(self):
        base = {
            "kind": "porosity",
            "grid": {"box": [[-1.0, 1.0], [-1.0, 1.0]], "counts": [65, 65]},
            "p": 2.0,
            "data": {"preset": "dome"},
        }
        cfg = parse_config(
            {**base, "measure": {"radii_factors": [4, 8], "max_points": 12}}
        )
        assert cfg.measure.radii_factors == (4.0, 8.0)
        assert cfg.measure.max_points == 12
        raises_with(
            {**base, "measure": {"anchor": [0.0, 0.0]}}, "measure.anchor: unknown key"
        )
        raises_with(
            {**base, "measure": {"radii_factors": [2.0]}},
            "measure.radii_factors[0]",
        )

    def test_shell_half_width_only_for_nondeg(self):
        raises_with(
            growth_cfg(measure={"anchor": [0.0], "shell_half_width": 0.01}),
            "measure.shell_half_width: unknown key",
        )
        cfg = parse_config(
            {
                "kind": "nondeg",
                "grid": {"box": [[-1.5, 1.5]], "counts": [513]},
                "p": 3.0,
                "data": {"preset": "dome"},
                "measure": {"anchor": [0.4], "shell_half_width": 0.01},
            }
        )
        assert cfg.measure.shell_half_width == 0.01


class TestOracleSection:
    def oracle_cfg(self, **over):
        base = {"kind": "oracle", "oracle": {"name": "parabolic_halfspace", "p": 3.0}}
        base["oracle"].update(over)
        return base

    def test_defaults(self):
        cfg = parse_config(self.oracle_cfg())
        assert cfg.oracle.levels == 3
        assert cfg.oracle.perturb == 0.1
        assert cfg.oracle.constant is None

    def test_name_choices(self):
        raises_with(self.oracle_cfg(name="bessel"), "oracle.name")

    def test_constant_quoted_or_number(self):
        cfg = parse_config(self.oracle_cfg(constant="quoted"))
        assert cfg.oracle.constant == "quoted"
        cfg = parse_config(self.oracle_cfg(constant=0.5))
        assert cfg.oracle.constant == 0.5
        raises_with(self.oracle_cfg(constant="paper"), "oracle.constant")
        raises_with(self.oracle_cfg(constant=0.0), "oracle.constant")

    def test_levels_floor(self):
        raises_with(self.oracle_cfg(levels=2), "oracle.levels")

    def test_audit_rejects_barenblatt(self):
        raises_with(
            {"kind": "audit", "oracle": {"name": "barenblatt", "p": 3.0}},
            "no single-amplitude audit",
        )

    def test_audit_rejects_oracle_only_knobs(self):
        raises_with(
            {
                "kind": "audit",
                "oracle": {"name": "source_type", "p": 3.0, "perturb": 0.1},
            },
            "oracle.perturb: unknown key",
        )

    def test_bad_family_parameters_surface_eagerly(self):
        raises_with(self.oracle_cfg(name="source_type", p=2.0), "oracle")

    def test_counts_dimension(self):
        raises_with(
            self.oracle_cfg(dim=2, counts=[65]), "expected 2 node count"
        )


class TestNormalizedEcho:
    def test_solver_defaults_filled(self):
        cfg = parse_config(elliptic_cfg())
        echo = cfg.normalized()
        assert echo["solver"]["omega"] == 1.0
        assert echo["solver"]["sweep_order"] == "lexicographic"
        assert echo["kind"] == "elliptic"
        assert echo["data"] == {"preset": "pressed_ramp"}
        assert echo["threads"] == 1 and echo["seed"] == 0

    def test_params_echo_sorted(self):
        cfg = parse_config(
            elliptic_cfg(data={"preset": "dome", "params": {"height": 0.2, "curvature": 2.0}})
        )
        keys = list(cfg.normalized()["data"]["params"])
        assert keys == sorted(keys)

    def test_echo_is_json_serializable(self):
        cfg = parse_config(parabolic_cfg())
        json.dumps(cfg.normalized(), sort_keys=True, allow_nan=False)


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError) as info:
            load_config(tmp_path / "nope.json")
        assert "cannot read config file" in str(info.value)

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"kind": "elliptic",\n  "p": }\n')
        with pytest.raises(ConfigurationError) as info:
            load_config(path)
        assert "not valid JSON" in str(info.value)
        assert "line 2" in str(info.value)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "ok.json"
        path.write_text(json.dumps(elliptic_cfg()))
        cfg = load_config(path)
        assert cfg.kind == "elliptic"
        assert cfg.digest == canonical_digest(elliptic_cfg())
