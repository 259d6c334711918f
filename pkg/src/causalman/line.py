"""Parametric press-fit production lines and the shipped presets.

A line has sections, each section has machines, each machine press-fits
magnetic valves into ``n_chambers * bores_per_chamber`` bores of one
hydraulic unit. Node names follow one scheme:

* ``HU_*``                       unit-level nodes (product type, E_hu, Force_Lim)
* ``PF_M<g>_MV_Supplier``        valve supplier of machine ``g`` (global index)
* ``PF_M<g>_T<t>_<role>``        bore ``t`` of machine ``g``
* ``PF_M<g>_C<c>_<role>``        chamber ``c`` of machine ``g``
* ``Sec_C<s>_Machine<m>_ProcessResult``  the AND over machine ``m`` of section ``s``

All numeric defaults are repo-chosen; see :func:`default_config`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Mapping

from .physics import MachineParams
from .projection import latent_project
from .sampling import BatchConfig
from .scm import (AffineMix, Boolean, Categorical, CategoricalDist, ConditionalGaussian,
                  Continuous, ExogenousNoise, HalfNormal, LogicalAnd, Max, NodeSpec,
                  PhysicsFormula, Relu, ScmGraph, Sum, TableLookup, ToleranceCheck, Visibility,
                  validate)

TYPE_NODE = "HU_HU_Block_Type_ID_num"

MV_PARAMS = ("E_mv", "A_leak_MV_raw", "D_mvMax", "D_mvMin", "L_mvPF")
BORE_PARAMS = ("E_bore_local", "D_boreMax", "D_boreMin")
HU_PARAMS = ("E_hu", "Force_Lim")
MONITORABLE = ("Force", "s_grad", "F_max", "s_max")

DEFAULT_LATENT_ROLES = frozenset(
    MV_PARAMS + BORE_PARAMS + HU_PARAMS
    + ("E_bore", "dD_max", "dD_min", "dD_mean", "E_eff", "K_stiffPF", "K_stiff", "ds_grad",
       "dF_trigger_stop", "ds_max", "A_leak_MV", "A_leak_PF", "A_leak_Bore",
       "C_F_max", "C_dForce_ReLU", "C_LeakTolMachine", "C_A_leak_tot")
)

# Quantities that must stay positive are truncated at zero where they are drawn.
_POSITIVE = {"E_mv", "D_mvMax", "D_mvMin", "L_mvPF", "E_bore_local", "D_boreMax", "D_boreMin",
             "E_hu", "Force_Lim"}

Table = Mapping[str, tuple[float, float]]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class LineConfig:
    """Everything needed to build one line graph.

    Tables map a joined key to ``(mu, sigma)``: ``"supplier|type"`` for valve
    parameters and ``"type"`` for bore and unit parameters. Tolerance windows
    map monitored attribute -> type -> ``(ltl, utl)``. ``machine_params``
    may be shorter than the machine count; missing machines use defaults.
    ``latent_roles`` is the visibility policy.
    """

    name: str
    n_sections: int
    n_machines_per_section: int
    n_chambers: int
    bores_per_chamber: int
    suppliers: tuple[str, ...]
    product_types: tuple[str, ...]
    mv_tables: dict[str, Table]
    bore_tables: dict[str, Table]
    hu_tables: dict[str, Table]
    tolerances: dict[str, dict[str, tuple[float, float]]]
    monitored: tuple[str, ...] = ("Force", "s_grad")
    machine_params: tuple[MachineParams, ...] = ()
    latent_roles: frozenset[str] = DEFAULT_LATENT_ROLES
    e_bore_unit_weight: float = 0.5
    first_section_index: int = 2

    @property
    def n_suppliers(self) -> int:
        return len(self.suppliers)

    @property
    def n_product_types(self) -> int:
        return len(self.product_types)

    @property
    def n_machines(self) -> int:
        return self.n_sections * self.n_machines_per_section

    def machine(self, g: int) -> MachineParams:
        """Settings of machine ``g`` (0-based global index)."""
        return self.machine_params[g] if g < len(self.machine_params) else MachineParams()

    def check(self) -> None:
        for f in ("n_sections", "n_machines_per_section", "n_chambers", "bores_per_chamber"):
            if not isinstance(getattr(self, f), int) or getattr(self, f) < 1:
                raise ConfigError(f"{f} must be a positive int")
        for labels, what in ((self.suppliers, "suppliers"), (self.product_types, "product_types")):
            if not labels or len(set(labels)) != len(labels):
                raise ConfigError(f"{what} must be non-empty and duplicate-free")
        if not 0.0 <= self.e_bore_unit_weight <= 1.0:
            raise ConfigError("e_bore_unit_weight must lie in [0, 1]")
        mv_keys = {f"{s}|{t}" for s in self.suppliers for t in self.product_types}
        _check_tables(self.mv_tables, MV_PARAMS, mv_keys)
        _check_tables(self.bore_tables, BORE_PARAMS, set(self.product_types))
        _check_tables(self.hu_tables, HU_PARAMS, set(self.product_types))
        if not self.monitored:
            raise ConfigError("at least one monitored attribute is required")
        for attr in self.monitored:
            if attr not in MONITORABLE:
                raise ConfigError(f"{attr!r} is not monitorable; choose from {MONITORABLE}")
            windows = self.tolerances.get(attr)
            if windows is None or set(windows) != set(self.product_types):
                raise ConfigError(f"tolerance windows for {attr} must cover every product type")
            for t, (ltl, utl) in windows.items():
                if not ltl <= utl:
                    raise ConfigError(f"{attr}/{t}: ltl {ltl} > utl {utl}")


def _check_tables(tables, roles, keys):
    for role in roles:
        table = tables.get(role)
        if table is None:
            raise ConfigError(f"missing parameter table {role}")
        missing = sorted(keys - set(table))
        if missing:
            raise ConfigError(f"table {role} is incomplete; missing keys {missing}")
        for key, (mu, sd) in table.items():
            if not sd > 0:
                raise ConfigError(f"table {role}[{key}]: sigma must be > 0")
        if set(table) != keys:
            missing = sorted(keys - set(table))
            raise ConfigError(f"table {role} incomplete or has unknown keys (missing {missing})")
        for k, (mu, sigma) in table.items():
            if not sigma > 0:
                raise ConfigError(f"table {role}[{k}]: sigma must be > 0")


# ---------------------------------------------------------------------------
# Defaults

# (mu, sigma) of each parameter for the first supplier/type. Units mm, MPa, N.
_BASE = {
    "E_mv": (210000.0, 1500.0),
    "A_leak_MV_raw": (-0.004, 0.002),
    "D_mvMax": (8.060, 0.0004),
    "D_mvMin": (8.040, 0.0004),
    "L_mvPF": (2.0, 0.008),
    "E_bore_local": (70000.0, 1200.0),
    "D_boreMax": (8.010, 0.0004),
    "D_boreMin": (7.990, 0.0004),
    "E_hu": (70000.0, 800.0),
    "Force_Lim": (18500.0, 250.0),
}


def _spread(labels, i, step):
    return step * (i - (len(labels) - 1) / 2.0)


def default_tables(suppliers, product_types):
    """Conditional-Gaussian tables with category means spread by >= 3 sigma.

    Suppliers shift valve parameters by 3.5 sigma per supplier; product types
    shift them by 0.5 sigma. Sigmas also differ per category.
    """
    mv = {}
    for role in MV_PARAMS:
        mu, sd = _BASE[role]
        mv[role] = {f"{s}|{t}": (mu + _spread(suppliers, i, 3.5 * sd) + _spread(product_types, j, 0.5 * sd),
                                 sd * (1.0 + 0.1 * i) * (1.0 + 0.05 * j))
                    for i, s in enumerate(suppliers) for j, t in enumerate(product_types)}
    per_type = {}
    for role in BORE_PARAMS + HU_PARAMS:
        mu, sd = _BASE[role]
        per_type[role] = {t: (mu + _spread(product_types, j, 3.0 * sd), sd * (1.0 + 0.1 * j))
                          for j, t in enumerate(product_types)}
    bore = {r: per_type[r] for r in BORE_PARAMS}
    hu = {r: per_type[r] for r in HU_PARAMS}
    return mv, bore, hu


# Windows per product-type index, calibrated so each check rejects roughly
# 0.2 % per tail of observational samples.
_DEFAULT_WINDOWS = {
    "Force": [(15350.0, 17180.0), (15530.0, 17470.0), (15720.0, 17800.0)],
    "s_grad": [(12.735, 12.885), (12.749, 12.902), (12.762, 12.922)],
    "F_max": [(15400.0, 17500.0), (15600.0, 17800.0), (15800.0, 18100.0)],
    "s_max": [(12.735, 12.895), (12.749, 12.912), (12.762, 12.932)],
}


def default_tolerances(product_types, monitored):
    out = {}
    for attr in monitored:
        windows = _DEFAULT_WINDOWS[attr]
        out[attr] = {t: windows[j % len(windows)] for j, t in enumerate(product_types)}
    return out


def default_config(name, n_sections, n_machines_per_section, n_chambers, bores_per_chamber,
                   suppliers=("S1", "S2"), product_types=("921", "935", "947"),
                   monitored=("Force", "s_grad")) -> LineConfig:
    mv, bore, hu = default_tables(suppliers, product_types)
    return LineConfig(name, n_sections, n_machines_per_section, n_chambers, bores_per_chamber,
                      tuple(suppliers), tuple(product_types), mv, bore, hu,
                      default_tolerances(product_types, monitored), tuple(monitored))


PRESETS = {
    "small": lambda: default_config("small", 1, 1, 1, 5),
    "medium": lambda: default_config("medium", 2, 1, 3, 3),
}


def preset(name: str) -> LineConfig:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None


# ---------------------------------------------------------------------------
# Build


class _Builder:
    def __init__(self, latent_roles):
        self.nodes: list[NodeSpec] = []
        self.latent_roles = latent_roles

    def add(self, name, role, mechanism, domain=Continuous(), parameter=False) -> int:
        vis = Visibility.LATENT if role in self.latent_roles else Visibility.OBSERVABLE
        nid = len(self.nodes)
        self.nodes.append(NodeSpec(nid, name, domain, vis, mechanism, parameter))
        return nid


def _uniform(k):
    return CategoricalDist(tuple([1.0 / k] * k))


def _cg(parents, table, keyfn, role):
    rows = tuple((keyfn(k), (float(mu), float(sd))) for k, (mu, sd) in sorted(table.items()))
    return ConditionalGaussian(tuple(parents), rows, 0.0 if role in _POSITIVE else None)


def build(config: LineConfig) -> ScmGraph:
    """Wire the full line DAG (latents included) and validate it."""
    config.check()
    b = _Builder(config.latent_roles)
    types = config.product_types
    t_id = b.add(TYPE_NODE, "type", ExogenousNoise(_uniform(len(types))),
                 Categorical(types), parameter=True)
    hu = {role: b.add(f"HU_{role}", role,
                      _cg([t_id], config.hu_tables[role], lambda k: (k,), role))
          for role in HU_PARAMS}
    # Tolerance windows depend only on the product type.
    def window(attr, side):
        return TableLookup((t_id,), tuple(((t,), float(w[side]))
                                          for t, w in sorted(config.tolerances[attr].items())))

    g = 0
    for s in range(config.n_sections):
        for m in range(config.n_machines_per_section):
            mp = config.machine(g)
            pre = f"PF_M{g + 1}"
            sup = b.add(f"{pre}_MV_Supplier", "supplier",
                        ExogenousNoise(_uniform(config.n_suppliers)),
                        Categorical(config.suppliers), parameter=True)
            flags = []
            t = 0
            for c in range(config.n_chambers):
                bore_fmax, bore_parts = [], []
                for _ in range(config.bores_per_chamber):
                    t += 1
                    ids = _bore(b, f"{pre}_T{t}", config, mp, sup, t_id, hu)
                    bore_fmax.append(ids["F_max"])
                    bore_parts.append(ids)
                    for attr in config.monitored:
                        name = f"{pre}_T{t}_{attr}"
                        lo = b.add(f"{name}_LTL", "LTL", window(attr, 0))
                        hi = b.add(f"{name}_UTL", "UTL", window(attr, 1))
                        flags.append(b.add(f"{name}_MpGood", "MpGood",
                                           ToleranceCheck(ids[attr], lo, hi), Boolean()))
                _chamber(b, f"{pre}_C{c + 1}", mp, bore_fmax, bore_parts, hu["Force_Lim"])
            sec = config.first_section_index + s
            b.add(f"Sec_C{sec}_Machine{m + 1}_ProcessResult", "ProcessResult",
                  LogicalAnd(tuple(flags)), Boolean())
            g += 1
    graph = ScmGraph(tuple(b.nodes), name=f"causalman-{config.name}", version="1")
    validate(graph).raise_if_invalid()
    return graph


def _bore(b: _Builder, pre, config, mp: MachineParams, sup, t_id, hu) -> dict[str, int]:
    ids = {}
    for role in MV_PARAMS:
        ids[role] = b.add(f"{pre}_{role}", role,
                          _cg([sup, t_id], config.mv_tables[role], lambda k: tuple(k.split("|")), role))
    for role in BORE_PARAMS:
        ids[role] = b.add(f"{pre}_{role}", role,
                          _cg([t_id], config.bore_tables[role], lambda k: (k,), role))

    def phys(role, formula, constants=(), **bind):
        ids[role] = b.add(f"{pre}_{role}", role, PhysicsFormula(
            formula, tuple((r, ids[v] if isinstance(v, str) else v) for r, v in bind.items()),
            tuple(constants)))

    ids["E_bore"] = b.add(f"{pre}_E_bore", "E_bore",
                          AffineMix(config.e_bore_unit_weight, hu["E_hu"], ids["E_bore_local"]))
    phys("dD_max", "delta_d_max", d_mv_max="D_mvMax", d_bore_min="D_boreMin")
    phys("dD_min", "delta_d_min", d_mv_min="D_mvMin", d_bore_max="D_boreMax")
    ids["dD_mean"] = b.add(f"{pre}_dD_mean", "dD_mean",
                           AffineMix(mp.beta_asym, ids["dD_max"], ids["dD_min"]))
    phys("E_eff", "effective_elasticity", e_bore="E_bore", e_mv="E_mv")
    phys("K_stiffPF", "pf_stiffness",
         (("k_ref", mp.k_stiff_pf_ref), ("dd_ref", mp.k_stiff_pf_dd_ref), ("e_ref", mp.k_stiff_pf_e_ref)),
         dd_mean="dD_mean", e_eff="E_eff")
    phys("K_stiff", "total_stiffness", (("k_machine", mp.k_stiff_machine),), k_pf="K_stiffPF")
    phys("Force", "pressing_force", l_mv_pf="L_mvPF", k_stiff_pf="K_stiffPF")
    phys("ds_grad", "displacement_delta", force="Force", k_stiff="K_stiff")
    phys("s_grad", "tool_position", (("s0", mp.s0),), ds_grad="ds_grad")
    ids["dF_trigger_stop"] = b.add(f"{pre}_dF_trigger_stop", "dF_trigger_stop",
                                   ExogenousNoise(HalfNormal(mp.trigger_stop_sigma)))
    phys("F_max", "max_force", force="Force", df_trigger_stop="dF_trigger_stop")
    phys("ds_max", "max_displacement_delta", (("k_stiff_machine", mp.k_stiff_machine),),
         df_trigger_stop="dF_trigger_stop")
    phys("s_max", "max_position", s_grad="s_grad", ds_max="ds_max")
    ids["A_leak_MV"] = b.add(f"{pre}_A_leak_MV", "A_leak_MV", Relu(ids["A_leak_MV_raw"]))
    return ids


def _chamber(b: _Builder, pre, mp: MachineParams, bore_fmax, bore_parts, f_lim):
    fmax = b.add(f"{pre}_F_max", "C_F_max", Max(tuple(bore_fmax)))
    dforce = b.add(f"{pre}_dForce_ReLU", "C_dForce_ReLU", PhysicsFormula(
        "delta_force_relu", (("f_max_chamber", fmax), ("f_lim", f_lim))))
    tol = b.add(f"{pre}_LeakTolMachine", "C_LeakTolMachine", PhysicsFormula(
        "leak_tol_machine", (("d_force_relu", dforce),),
        (("leak_tol_0", mp.leak_tol_0), ("leak_tol_ref", mp.leak_tol_ref),
         ("d_force_ref", mp.d_force_ref))))
    totals = []
    for ids in bore_parts:
        pre_b = b.nodes[ids["Force"]].name.rsplit("_", 1)[0]
        pf = b.add(f"{pre_b}_A_leak_PF", "A_leak_PF", PhysicsFormula(
            "leak_area_pf", (("dd_max", ids["dD_max"]), ("dd_min", ids["dD_min"]), ("leak_tol", tol)),
            (("beta_asym", mp.beta_asym),)))
        totals.append(b.add(f"{pre_b}_A_leak_Bore", "A_leak_Bore", PhysicsFormula(
            "a_leak_bore", (("a_leak_mv", ids["A_leak_MV"]), ("a_leak_pf", pf)))))
    b.add(f"{pre}_A_leak_tot", "C_A_leak_tot", Sum(tuple(totals)))


# ---------------------------------------------------------------------------
# Census and schedules


@dataclass(frozen=True)
class Census:
    total: int
    observable: int
    latent: int
    edges: int
    projected_directed: int
    projected_bidirected: int
    # Distinct observable pairs joined by any edge; a pair carrying both a
    # directed and a bidirected edge counts once here.
    projected_adjacent_pairs: int

    @property
    def latent_fraction(self) -> float:
        return self.latent / self.total if self.total else 0.0

    def as_dict(self) -> dict:
        return asdict(self)


def node_census(graph: ScmGraph) -> Census:
    admg = latent_project(graph)
    latent = len(graph.latent_ids())
    return Census(len(graph.nodes), len(graph.nodes) - latent, latent, len(graph.edges),
                  len(admg.directed), len(admg.bidirected), len(admg.adjacent_pairs()))


def golden_census() -> dict[str, dict]:
    """The census of each preset as shipped with the package."""
    text = resources.files("causalman").joinpath("data/census.json").read_text()
    return json.loads(text)


def default_schedule(n_rows: int, batch_size: int = 1000, first_batch_id: int = 0) -> list[BatchConfig]:
    """Observational batches of ``batch_size`` rows (last one may be shorter).

    Parameter nodes are left unpinned, so each batch draws its own product
    type and suppliers.
    """
    if n_rows < 1 or batch_size < 1:
        raise ValueError("n_rows and batch_size must be >= 1")
    out = []
    done = 0
    while done < n_rows:
        n = min(batch_size, n_rows - done)
        out.append(BatchConfig(first_batch_id + len(out), n))
        done += n
    return out


# ---------------------------------------------------------------------------
# JSON form of LineConfig


def config_to_dict(config: LineConfig) -> dict:
    d = asdict(config)
    d["format"] = "causalman-line"
    d["suppliers"] = list(config.suppliers)
    d["product_types"] = list(config.product_types)
    d["monitored"] = list(config.monitored)
    d["latent_roles"] = sorted(config.latent_roles)
    d["mv_tables"] = {r: {k: list(v) for k, v in t.items()} for r, t in config.mv_tables.items()}
    d["bore_tables"] = {r: {k: list(v) for k, v in t.items()} for r, t in config.bore_tables.items()}
    d["hu_tables"] = {r: {k: list(v) for k, v in t.items()} for r, t in config.hu_tables.items()}
    d["tolerances"] = {a: {k: list(v) for k, v in w.items()} for a, w in config.tolerances.items()}
    d["machine_params"] = [asdict(m) for m in config.machine_params]
    return d


def config_from_dict(d: dict) -> LineConfig:
    if d.get("format") != "causalman-line":
        raise ConfigError("not a causalman line config document")
    try:
        tables = {k: {r: {key: tuple(v) for key, v in t.items()} for r, t in d[k].items()}
                  for k in ("mv_tables", "bore_tables", "hu_tables")}
        cfg = LineConfig(
            name=d["name"], n_sections=d["n_sections"],
            n_machines_per_section=d["n_machines_per_section"], n_chambers=d["n_chambers"],
            bores_per_chamber=d["bores_per_chamber"], suppliers=tuple(d["suppliers"]),
            product_types=tuple(str(t) for t in d["product_types"]),
            tolerances={a: {k: tuple(v) for k, v in w.items()} for a, w in d["tolerances"].items()},
            monitored=tuple(d.get("monitored", ("Force", "s_grad"))),
            machine_params=tuple(MachineParams(**m) for m in d.get("machine_params", [])),
            latent_roles=frozenset(d.get("latent_roles", DEFAULT_LATENT_ROLES)),
            e_bore_unit_weight=float(d.get("e_bore_unit_weight", 0.5)),
            first_section_index=int(d.get("first_section_index", 2)),
            **tables)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed line config: {exc}") from None
    cfg.check()
    return cfg
