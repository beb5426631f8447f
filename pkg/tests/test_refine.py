"""Refinement: golden structure for the running example, behaviour of the
per-level dispatch, metadata, and the fallback-guard construction."""

import copy
import itertools

import pytest

from pmx import actions as A
from pmx import model as M
from pmx.analysis import Setting, analyze, analyze_hsm
from pmx.parser import parse_model
from pmx.printer import serialize_model
from pmx.refine import RefineError, negated_disjunction_guard, refine_model
from pmx.runtime import build_options

TL_SETTING = "CTR=partial,UC=absent,SLD=complete"


def _component_text(model, name):
    # the serialized block of one component
    text = serialize_model(model)
    start = text.index(f"component {name}")
    end = text.index("\n}", start) + 2
    return text[start:end]


class TestTrafficLightGolden:
    """Hand-derived tally from walking the refinement steps over the figure:
    5 added states (two decision points, an initial for c11, entry/exit points
    on c11) and 14 added transitions."""

    def test_states(self, traffic_refined):
        refined, meta = traffic_refined
        h = refined.component("CTR").behavior
        ids = {s.id for s in h.descendants(M.ROOT_ID)}
        assert ids == {
            "in11", "s11", "c11", "en1", "s21", "s22", "s23",
            "__pmx_dec_root", "__pmx_dec_c11", "__pmx_in_c11",
            "__pmx_en_c11", "__pmx_ex_c11"}
        assert len(ids) == 12

    def test_transition_tally(self, traffic_refined):
        refined, meta = traffic_refined
        h = refined.component("CTR").behavior
        assert len(h.transitions) == 20  # 6 original + 14 added
        assert len(meta.components["CTR"].added & {t.id for t in h.transitions}) == 14

    def test_dec_p_per_composite(self, traffic_refined):
        refined, meta = traffic_refined
        assert meta.components["CTR"].dec_points == {
            "root": "__pmx_dec_root", "c11": "__pmx_dec_c11"}

    def test_yellow_dec_p_edges(self, traffic_refined):
        refined, _ = traffic_refined
        h = refined.component("CTR").behavior
        # yellow (and red) gained transitions to the decision point and back
        assert any(t.src == "s23" and t.des == "__pmx_dec_c11" for t in h.transitions)
        assert any(t.src == "__pmx_dec_c11" and t.des == "s23" for t in h.transitions)
        assert any(t.src == "s21" and t.des == "__pmx_dec_c11" for t in h.transitions)
        assert any(t.src == "__pmx_dec_c11" and t.des == "s21" for t in h.transitions)

    def test_t13_retargeted(self, traffic_refined):
        refined, meta = traffic_refined
        h = refined.component("CTR").behavior
        t13 = h.transition("t13")
        assert t13.src == "__pmx_dec_root" and t13.des == "s11"
        assert "t13" in meta.components["CTR"].modified
        assert meta.org("t13", "CTR") == "t13"

    def test_unhandled_triggers_feed_the_decision_point(self, traffic_refined):
        refined, _ = traffic_refined
        h = refined.component("CTR").behavior
        t = next(t for t in h.transitions if t.src == "s23" and t.des == "__pmx_dec_c11")
        assert {r.message for r in t.trig} == {"on", "off", "timeout", "dbg"}
        t_off = next(t for t in h.transitions if t.src == "s11" and t.des == "__pmx_dec_root")
        assert {r.message for r in t_off.trig} == {"off", "timeout", "dbg"}

    def test_every_dec_p_exit_is_selection_guarded(self, traffic_refined):
        refined, meta = traffic_refined
        for name, hr in meta.components.items():
            h = refined.component(name).behavior
            for dec in hr.dec_points.values():
                for k, t in enumerate(h.out_t(dec)):
                    assert isinstance(t.guard, A.Binary) and t.guard.op == "=="
                    assert t.guard.left == A.Var("__pmx_sel")
                    assert t.guard.right == A.Lit(k), f"{name}.{t.id} guard out of order"

    def test_every_dec_p_entry_carries_a_probe(self, traffic_refined):
        refined, meta = traffic_refined
        for name, hr in meta.components.items():
            h = refined.component(name).behavior
            for dec in hr.dec_points.values():
                for t in h.in_t(dec):
                    assert t.act and isinstance(t.act.statements[-1], A.Probe)
                    assert t.act.statements[-1].dec_p == dec

    def test_refined_passes_validate(self, traffic_refined):
        refined, _ = traffic_refined
        assert M.validate(refined) == []

    def test_component_count_grows_by_exactly_one(self, traffic_model, traffic_refined):
        refined, _ = traffic_refined
        assert len(refined.components) == len(traffic_model.components) + 1
        assert refined.has_component("dbg_agent")

    def test_sld_untouched(self, traffic_model, traffic_refined):
        refined, _ = traffic_refined
        assert _component_text(refined, "SLD") == _component_text(traffic_model, "SLD")

    def test_absent_uc_gets_generic_machine(self, traffic_refined):
        refined, meta = traffic_refined
        h = refined.component("UC").behavior
        kinds = {s.id: s.kind for s in h.descendants(M.ROOT_ID)}
        assert kinds == {"__pmx_in_root": M.INITIAL, "__pmx_b_root": M.BASIC,
                         "__pmx_dec_root": M.CHOICE}
        catcher = next(t for t in h.transitions if t.src == "__pmx_b_root")
        assert {r.message for r in catcher.trig} == {"on", "off", "dbg"}

    def test_introduced_variable(self, traffic_refined):
        refined, meta = traffic_refined
        assert meta.components["CTR"].introduced_vars == ["__pmx_sel"]
        assert any(v.name == "__pmx_sel" for v in refined.component("CTR").variables)
        assert not any(v.name == "__pmx_sel" for v in refined.component("SLD").variables)

    def test_org_mapping(self, traffic_refined):
        _, meta = traffic_refined
        assert meta.org("t21", "CTR") == "t21"
        assert meta.org("__pmx_dec_c11", "CTR") is None
        assert meta.org("t13", "CTR") == "t13"

    def test_re_analysis_is_clean(self, traffic_refined):
        refined, _ = traffic_refined
        for name in ("CTR", "UC", "dbg_agent"):
            rep = analyze_hsm(refined, refined.component(name))
            assert rep.p1 == [] and rep.p2 == [] and rep.p3 == []
            assert rep.p4 == [] and rep.p5 == {}
            assert rep.p9 == [] and rep.p10 == []

    def test_option_hints_reach_off_from_yellow(self, traffic_refined):
        refined, _ = traffic_refined
        h = refined.component("CTR").behavior
        options = build_options(h, "__pmx_dec_c11")
        names = [o.destination_name for o in options]
        assert names[:3] == ["red", "green", "yellow"]
        hop = options[3]
        assert hop.hop_targets == ("off",)

    def test_dbg_wiring(self, traffic_refined):
        refined, _ = traffic_refined
        assert refined.interface("dbg_int") is not None
        assert (("CTR", "__pmx_dbg"), ("dbg_agent", "__pmx_dbg_CTR")) in refined.connectors
        assert (("UC", "__pmx_dbg"), ("dbg_agent", "__pmx_dbg_UC")) in refined.connectors
        assert refined.component("SLD").port("__pmx_dbg") is None


class TestDispatch:
    def test_all_complete_adds_only_the_agent(self, traffic_model):
        refined, meta = refine_model(traffic_model, "")
        assert [c.name for c in refined.components] == ["UC", "CTR", "SLD", "dbg_agent"]
        for name in ("UC", "CTR", "SLD"):
            assert _component_text(refined, name) == _component_text(traffic_model, name)
        assert set(meta.components) == {"dbg_agent"}

    def test_input_model_is_untouched(self, traffic_model):
        snapshot = serialize_model(traffic_model)
        refine_model(traffic_model, TL_SETTING)
        assert serialize_model(traffic_model) == snapshot

    def test_refined_roundtrips_through_text(self, traffic_refined):
        refined, _ = traffic_refined
        text = serialize_model(refined)
        assert serialize_model(parse_model(text)) == text

    def test_reserved_variable_collision(self, traffic):
        traffic.component("CTR").variables.append(M.Variable("__pmx_sel", "int", 0))
        with pytest.raises(RefineError):
            refine_model(traffic, TL_SETTING)

    def test_invalid_setting(self, traffic_model):
        with pytest.raises(M.ModelError):
            refine_model(traffic_model, "Ghost=partial")

    def test_empty_hsm_refinement(self):
        text = ("system S\ninterface I { in m() }\n"
                "component A {\n  port p: I\n  statemachine {\n  }\n}\n")
        model = parse_model(text)
        refined, meta = refine_model(model, "A=partial")
        h = refined.component("A").behavior
        kinds = sorted((s.kind, s.id) for s in h.descendants(M.ROOT_ID))
        assert kinds == [
            (M.BASIC, "__pmx_b_root"), (M.CHOICE, "__pmx_dec_root"),
            (M.INITIAL, "__pmx_in_root")]


class TestChoicePoints:
    def test_fallback_guard_added(self, chooser_model):
        refined, meta = refine_model(chooser_model, "CH=partial,ENV=absent")
        h = refined.component("CH").behavior
        fallback = [t for t in h.out_t("ch1") if t.id in meta.components["CH"].added]
        assert len(fallback) == 1
        assert M.validate(refined) == []

    def test_negated_disjunction_shape(self, chooser_model):
        h = chooser_model.component("CH").behavior
        g = negated_disjunction_guard(h, "ch1")
        # !(count < 2 || count > 5): true exactly in the gap
        for count in range(0, 8):
            expect = not (count < 2 or count > 5)
            assert A.eval_guard({"count": count}, g) == expect

    def test_brute_force_equivalence_two_bools(self):
        h = M.Hsm()
        h.add_state(M.State("ch", "ch", M.CHOICE))
        h.add_state(M.State("a", "a", M.BASIC))
        h.add_state(M.State("b", "b", M.BASIC))
        h.add_transition(M.Transition("t1", "ch", "a", guard=A.Var("g1")))
        h.add_transition(M.Transition("t2", "ch", "b", guard=A.Var("g2")))
        g = negated_disjunction_guard(h, "ch")
        for g1, g2 in itertools.product((False, True), repeat=2):
            assert A.eval_guard({"g1": g1, "g2": g2}, g) == (not (g1 or g2))

    def test_no_outgoing_yields_literal_true(self):
        h = M.Hsm()
        h.add_state(M.State("ch", "ch", M.CHOICE))
        assert negated_disjunction_guard(h, "ch") == A.Lit(True)

    def test_guardless_out_makes_fallback_unreachable(self):
        h = M.Hsm()
        h.add_state(M.State("ch", "ch", M.CHOICE))
        h.add_state(M.State("a", "a", M.BASIC))
        h.add_transition(M.Transition("t1", "ch", "a"))
        g = negated_disjunction_guard(h, "ch")
        assert A.eval_guard({}, g) is False

    def test_non_choice_rejected(self, chooser_model):
        h = chooser_model.component("CH").behavior
        with pytest.raises(RefineError):
            negated_disjunction_guard(h, "idle")


class TestNestedRefinement:
    def test_parents_first_then_children_see_their_points(self, nested_model):
        refined, meta = refine_model(nested_model, "N=partial,DRV=absent")
        assert M.validate(refined) == []
        h = refined.component("N").behavior
        hr = meta.components["N"]
        assert set(hr.dec_points) == {"root", "outer", "outer.inner"}
        # inner's decision point hops up through inner's own exit point
        assert any(t.src == hr.dec_points["outer.inner"] and t.des == "__pmx_ex_outer.inner"
                   for t in h.transitions)
        assert any(t.src == "__pmx_ex_outer.inner" and t.des == hr.dec_points["outer"]
                   for t in h.transitions)
        # and outer's hops reach the root decision point
        assert any(t.src == "__pmx_ex_outer" and t.des == hr.dec_points["root"]
                   for t in h.transitions)

    def test_re_analysis_clean_on_nested(self, nested_model):
        refined, _ = refine_model(nested_model, "N=partial,DRV=absent")
        rep = analyze_hsm(refined, refined.component("N"))
        assert rep.p1 == [] and rep.p2 == [] and rep.p3 == [] and rep.p4 == []
        assert rep.p5 == {} and rep.p9 == [] and rep.p10 == []
