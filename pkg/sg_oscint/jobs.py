"""Job configs: schema validation and dispatch to the library."""
import json
from importlib import resources

import jsonschema
import numpy as np
import pandas as pd

from .catalog import (
    ORACLE_LATTICE,
    catalog_frame,
    delta_like,
    kg_ft_support_check,
    kg_mphi_residual,
    kg_sp_inclusion_check,
    kg_spec,
    kg_spphi_residual,
    kg_timelike_decay_check,
    kg_truncated_two_point,
    kg_two_point,
    mass_shell,
    oracle_comparison,
    resolve_amplitude,
    resolve_distribution,
    resolve_phase,
    resolve_testfn,
)
from .errors import JobValidationError
from .fio import (
    OscKernelOperator,
    apply_half,
    fourier_operator,
    inverse_fourier_operator,
    kg_evolve,
    type_one,
)
from .models import Protocol, QuadratureConfig, WfProtocol
from .oscint import OscIntegral, eval_pairing
from .phase import boundary_cells, check_admissible, mphi_grid, spphi_grid
from .synth import PrescribedWfSpec, make_prescribed, truncation_error
from .utils import get_threads, setup_config, setup_logger
from .wavefront import from_schwartz, wf_scan

config = setup_config()
logger = setup_logger(__name__, config)


def load_schema():
    text = resources.files(__package__).joinpath("job_schema.json")
    return json.loads(text.read_text())


def validate_job(job):
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    error = jsonschema.exceptions.best_match(validator.iter_errors(job))
    if error is not None:
        pointer = "/" + "/".join(str(part) for part in error.absolute_path)
        raise JobValidationError(error.message, pointer)


def parse_grid(text):
    """"a:b:n" as n equispaced points from a to b."""
    lo, hi, count = text.split(":")
    count = int(count)
    if count < 2:
        raise JobValidationError("grid needs at least two points", "/grid")
    return np.linspace(float(lo), float(hi), count)


def grid_mesh(axis, dim):
    mesh = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"))
    return mesh.reshape(dim, -1)


def _order(value):
    return None if value is None else tuple(float(v) for v in value)


def _dims(value):
    return None if value is None else tuple(int(v) for v in value)


def _protocol(job):
    return Protocol.from_overrides(job.get("protocol"))


def _quadrature(job):
    overrides = dict(job.get("quadrature") or {})
    for key in ("box", "tol"):
        if key in job:
            overrides[key] = job[key]
    return QuadratureConfig.from_overrides(overrides)


def _phase(job):
    return resolve_phase(
        job["phase"],
        _dims(job.get("dims")),
        _order(job.get("order")),
        job.get("mass", 1.0),
    )


def samples_frame(points, values):
    frame = pd.DataFrame(
        {f"x{i}": points[i] for i in range(points.shape[0])}
    )
    frame["re"] = np.real(values)
    frame["im"] = np.imag(values)
    return frame


def set_table(grid):
    """An M_φ/SP_φ grid without its CompactPoint columns."""
    frame = grid.drop(columns=["x", "xi"]).copy()
    for column in ("x_coords", "xi_coords"):
        frame[column] = frame[column].map(
            lambda coords: " ".join(f"{c:.9g}" for c in coords)
        )
    return frame


def _counts(grid):
    counts = grid["label"].value_counts().to_dict()
    return {key: int(value) for key, value in counts.items()}


def _with_oracle(grid, job, residual, protocol):
    spec = kg_spec(job["phase"], job.get("mass", 1.0))
    if spec is None:
        return grid, {}
    frame = oracle_comparison(grid, residual, spec.mass, 3 * protocol.delta)
    compared = frame.loc[frame["compared"]]
    summary = {
        "compared": int(len(compared)),
        "agree": int(compared["agrees"].sum()),
    }
    return frame, {"oracle": summary}


def check_phase_job(job, threads):
    protocol = _protocol(job)
    phi = _phase(job)
    report = check_admissible(phi, protocol, threads)
    body = {
        "phase": phi.source,
        "order": list(phi.order),
        "admissible": report.elliptic,
        "report": report.to_json(),
    }
    return body, {}


def _cells(job, dims, protocol):
    cells = job.get("cells") or {}
    return boundary_cells(
        dims,
        tuple(cells.get("finite_x", ORACLE_LATTICE)),
        tuple(cells.get("finite_xi", ORACLE_LATTICE)),
        protocol,
    )


def mphi_job(job, threads):
    protocol = _protocol(job)
    phi = _phase(job)
    grid = mphi_grid(phi, _cells(job, phi.dims, protocol), protocol, threads)
    grid, extra = _with_oracle(grid, job, kg_mphi_residual, protocol)
    body = {"phase": phi.source, "counts": _counts(grid), **extra}
    body["protocol"] = protocol.to_json()
    return body, {"mphi": set_table(grid)}


def spphi_job(job, threads):
    protocol = _protocol(job)
    phi = _phase(job)
    d = phi.dims[0]
    mgrid = mphi_grid(phi, _cells(job, phi.dims, protocol), protocol, threads)
    cells = _cells(job, (d, d), protocol)
    grid = spphi_grid(phi, cells, mgrid, protocol, threads)
    grid, extra = _with_oracle(grid, job, kg_spphi_residual, protocol)
    body = {"phase": phi.source, "counts": _counts(grid), **extra}
    body["protocol"] = protocol.to_json()
    return body, {"mphi": set_table(mgrid), "spphi": set_table(grid)}


def eval_oscint_job(job, threads):
    protocol = _protocol(job)
    quadrature = _quadrature(job)
    phi = _phase(job)
    a = resolve_amplitude(
        job["amplitude"],
        phi.dims,
        _order(job.get("amplitude_order")),
        job.get("mass", 1.0),
    )
    f = resolve_testfn(job["testfn"], phi.dims[0])
    integral = OscIntegral(phi, a, job.get("r", "auto"), quadrature, protocol)
    result = eval_pairing(integral, f, threads)
    body = result.to_json()
    body.update(
        {
            "phase": phi.source,
            "amplitude": a.source,
            "testfn": f.source,
            "protocol": protocol.to_json(),
            "quadrature": quadrature.to_json(),
        }
    )
    return body, {}


def build_distribution(spec):
    name = spec["catalog"]
    mass = spec.get("mass", 1.0)
    if name in ("fk", "g-train"):
        return resolve_distribution(
            name, spec["omega"], spec["eta"], spec.get("k")
        )
    if name == "gauss":
        f = resolve_testfn("gauss", spec.get("dim", 1))
        return from_schwartz(f)
    if name == "delta":
        return delta_like(spec["center"])
    if name == "prescribed":
        prescribed = PrescribedWfSpec.from_json(spec.get("spec", {}))
        return make_prescribed(prescribed, dim=spec.get("dim", 1))
    if name == "kg11":
        return kg_truncated_two_point(mass, spec.get("sigma", 1.0))
    if name == "kg-two-point":
        return kg_two_point(mass)
    return mass_shell(spec.get("width", 0.1), mass)


def wf_scan_job(job, threads):
    protocol = WfProtocol.from_overrides(job.get("protocol"))
    u = build_distribution(job["distribution"])
    wf = wf_scan(u, protocol, threads)
    return wf.to_json(), {"wf": wf.to_frame()}


def synth_wf_job(job, threads):
    spec = PrescribedWfSpec.from_json(job["spec"])
    u = make_prescribed(spec, dim=job.get("dim", 1))
    box = job.get("box", 16.0)
    body = {
        "dim": u.dim,
        "truncation_error": truncation_error(spec, box),
        "box": box,
    }
    tables = {}
    if "grid" in job:
        points = grid_mesh(parse_grid(job["grid"]), u.dim)
        tables["samples"] = samples_frame(points, u(points))
    if job.get("scan", False):
        protocol = WfProtocol.from_overrides(job.get("protocol"))
        wf = wf_scan(u, protocol, threads)
        body["wf"] = wf.to_json()
        tables["wf"] = wf.to_frame()
    return body, tables


def _operator_image(spec, f, quadrature, protocol, threads):
    kind = spec["kind"]
    d = f.dim
    if kind == "fourier":
        op = fourier_operator(d, quadrature, protocol)
        return op.flags, apply_half(op, f, threads=threads)
    if kind == "inverse-fourier":
        op = inverse_fourier_operator(d, quadrature, protocol)
        return op.flags, apply_half(op, f, threads=threads)
    if kind == "kg":
        u = kg_evolve(
            f,
            spec.get("t", 0.0),
            spec.get("c", 1.0),
            spec.get("mass", 1.0),
            d,
            quadrature=quadrature,
            threads=threads,
        )
        return {}, u
    dims = _dims(spec.get("dims"))
    phi = resolve_phase(spec["phase"], dims, _order(spec.get("order")))
    amplitude = resolve_amplitude(
        spec["amplitude"], phi.dims, _order(spec.get("amplitude_order"))
    )
    if kind == "type-one":
        op = type_one(phi, amplitude, quadrature, protocol)
        return op.outer.flags, op.apply(f, threads)
    d_x = spec.get("d_x", phi.dims[0] - d)
    if d_x < 1:
        raise JobValidationError(
            "Kernel phase leaves no output variable", "/operator/d_x"
        )
    op = OscKernelOperator(phi, amplitude, d_x, quadrature, protocol, "A")
    return op.flags, op


def fio_apply_job(job, threads):
    protocol = _protocol(job)
    quadrature = _quadrature(job)
    f = resolve_testfn(job["f"], job.get("dim", 1))
    flags, image = _operator_image(
        job["operator"], f, quadrature, protocol, threads
    )
    axis = parse_grid(job["grid"])
    if isinstance(image, OscKernelOperator):
        points = grid_mesh(axis, image.d_x)
        values = image.apply(f, points, threads)
    else:
        points = grid_mesh(axis, image.dim)
        values = image(points)
    body = {
        "operator": job["operator"]["kind"],
        "flags": flags,
        "points": int(points.shape[1]),
        "protocol": protocol.to_json(),
        "quadrature": quadrature.to_json(),
    }
    return body, {"u": samples_frame(points, values)}


def kg_job(job, threads):
    quadrature = _quadrature(job)
    d = job.get("dim", 1)
    f = resolve_testfn(job.get("f", "gauss"), d)
    t, c, mass = job["t"], job.get("c", 1.0), job.get("mass", 1.0)
    u = kg_evolve(f, t, c, mass, d, quadrature=quadrature, threads=threads)
    points = grid_mesh(parse_grid(job["grid"]), d)
    values = u(points)
    body = {
        "t": t,
        "c": c,
        "mass": mass,
        "f": f.source,
        "max_abs": float(np.abs(values).max()),
        "max_imag": float(np.abs(values.imag).max()),
        "quadrature": quadrature.to_json(),
    }
    return body, {"u": samples_frame(points, values)}


def catalog_job(job, threads):
    frame = catalog_frame()
    body = {"entries": frame.to_dict(orient="records")}
    tables = {"catalog": frame}
    check = job.get("check")
    mass = job.get("mass", 1.0)
    if check == "ft-support":
        report, cells = kg_ft_support_check(mass=mass)
        body["ft_support"] = report
        tables["ft_support"] = cells.drop(columns=["y", "q"])
    elif check == "timelike-decay":
        passed, frame = kg_timelike_decay_check(mass)
        body["timelike_decay"] = {"passed": passed}
        frame["direction"] = frame["direction"].map(str)
        tables["timelike_decay"] = frame
    elif check == "sp-inclusion":
        report, frame = kg_sp_inclusion_check(mass=mass, threads=threads)
        body["sp_inclusion"] = report
        tables["sp_inclusion"] = frame.drop(columns=["y", "q"])
    return body, tables


COMMANDS = {
    "check-phase": check_phase_job,
    "mphi": mphi_job,
    "spphi": spphi_job,
    "eval-oscint": eval_oscint_job,
    "wf-scan": wf_scan_job,
    "synth-wf": synth_wf_job,
    "fio-apply": fio_apply_job,
    "kg": kg_job,
    "catalog": catalog_job,
}


def run_job(job):
    """Validate and run one job, returning (body, tables)."""
    validate_job(job)
    threads = job.get("threads") or get_threads(config)
    command = job["command"]
    logger.info(f"Running {command} with {threads} thread(s)")
    body, tables = COMMANDS[command](job, threads)
    body["command"] = command
    return body, tables
