"""Interactive scribble-labeling HTTP service.

Session workflow mirrors the interactive procedure: upload an image, add
class-labeled strokes round by round, run the solver, inspect progress and
the resulting label map, then add corrective strokes and re-run. Each
re-run re-initializes from the full accumulated scribble set.

API (all JSON unless noted), versioned under /v1:
    POST   /v1/sessions                  raw P5/P6 body -> {session_id}
    POST   /v1/sessions/{id}/scribbles   {strokes: [{class_id, pixels}]}
    POST   /v1/sessions/{id}/run
    GET    /v1/sessions/{id}/status
    GET    /v1/sessions/{id}/result      label map as base64 P5 + report
    DELETE /v1/sessions/{id}
"""

import base64
import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .dataterm import ScribbleSet
from .errors import ConvexSegError, InputError, ValidationError
from .fields import Grid2D
from .formats import decode_pnm, encode_pnm, parse_config_text
from .optimizer import AdmmParams, OuterParams
from .pipelines import solve_segmentation

MAX_SIDE = 4096
SNAPSHOT_INTERVAL = 0.1


@dataclass
class Stroke:
    class_id: int
    pixels: np.ndarray  # (n, 2) rows of (row, col)
    round_no: int


@dataclass
class Session:
    sid: str
    image: np.ndarray
    config: dict
    strokes: list = field(default_factory=list)
    round_no: int = 0
    status: str = "idle"  # idle | running | done | failed
    snapshot: dict = field(default_factory=dict)
    result: dict = None
    error: str = None
    lock: threading.Lock = field(default_factory=threading.Lock)
    cancel: threading.Event = field(default_factory=threading.Event)
    thread: threading.Thread = None
    _published_at: float = 0.0

    @property
    def grid(self) -> Grid2D:
        return Grid2D(*self.image.shape[:2])

    def scribble_set(self) -> ScribbleSet:
        pixels = {}
        for stroke in self.strokes:
            arr = pixels.setdefault(stroke.class_id, [])
            arr.extend(stroke.pixels.tolist())
        return ScribbleSet(grid=self.grid,
                           pixels={cid: np.array(v, dtype=np.int64)
                                   for cid, v in pixels.items()})

    def occupied(self) -> dict:
        out = {}
        for stroke in self.strokes:
            for r, c in stroke.pixels:
                out[(int(r), int(c))] = stroke.class_id
        return out


def _error(status: int, message: str):
    return JSONResponse({"error": message}, status_code=status)


def create_app() -> FastAPI:
    app = FastAPI(title="convexseg service", version="1")
    sessions: dict = {}

    def get_session(sid):
        return sessions.get(sid)

    @app.post("/v1/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.body()
        if not body:
            return _error(415, "empty body; expected a binary P5/P6 image")
        try:
            arr, maxval = decode_pnm(body)
        except (InputError, ValidationError) as exc:
            return _error(415, f"cannot decode image: {exc}")
        if arr.shape[0] > MAX_SIDE or arr.shape[1] > MAX_SIDE:
            return _error(413, f"image exceeds {MAX_SIDE}^2")
        if arr.shape[0] < 8 or arr.shape[1] < 8:
            return _error(415, "image smaller than the 8x8 solver minimum")
        config = {}
        raw_cfg = request.query_params.get("config")
        if raw_cfg:
            try:
                config = parse_config_text(raw_cfg.replace(";", "\n"))
            except ValidationError as exc:
                return _error(422, str(exc))
        sid = uuid.uuid4().hex
        sessions[sid] = Session(sid=sid, image=arr.astype(np.float64) / maxval,
                                config=config)
        return {"session_id": sid, "height": arr.shape[0], "width": arr.shape[1]}

    @app.post("/v1/sessions/{sid}/scribbles")
    def add_scribbles(sid: str, payload: dict):
        ses = get_session(sid)
        if ses is None:
            return _error(404, "unknown session")
        with ses.lock:
            if ses.status == "running":
                return _error(409, "solve in progress")
            strokes = payload.get("strokes", [])
            if not strokes:
                return _error(422, "no strokes supplied")
            occupied = ses.occupied()
            round_no = ses.round_no + 1
            accepted, rejected = [], []
            H, W = ses.image.shape[:2]
            for idx, stroke in enumerate(strokes):
                try:
                    cid = int(stroke["class_id"])
                    pix = np.array(stroke["pixels"], dtype=np.int64).reshape(-1, 2)
                except (KeyError, TypeError, ValueError):
                    rejected.append({"index": idx, "reason": "malformed stroke"})
                    continue
                if cid < 0:
                    rejected.append({"index": idx, "reason": "negative class id"})
                    continue
                if pix.size == 0 or pix.min() < 0 or pix[:, 0].max() >= H or pix[:, 1].max() >= W:
                    rejected.append({"index": idx, "reason": "pixels outside the image"})
                    continue
                conflicts = [[int(r), int(c)] for r, c in pix
                             if occupied.get((int(r), int(c)), cid) != cid]
                if conflicts:
                    rejected.append({"index": idx, "reason": "class conflict",
                                     "conflicts": conflicts})
                    continue
                for r, c in pix:
                    occupied[(int(r), int(c))] = cid
                ses.strokes.append(Stroke(class_id=cid, pixels=pix, round_no=round_no))
                accepted.append(idx)
            if accepted:
                ses.round_no = round_no
            return {"round": ses.round_no, "accepted": accepted, "rejected": rejected}

    def _solve(ses: Session):
        try:
            scribbles = ses.scribble_set()
            outer_kwargs, admm_kwargs = {}, {}
            cfg = ses.config
            for key, dest in [("lambda", "lam"), ("sigma", "sigma"), ("theta", "theta"),
                              ("belt_radius", "belt_radius"), ("omega", "omega"),
                              ("eps", "eps"), ("inner_budget", "inner_budget"),
                              ("max_outer", "max_outer"), ("warm_duals", "warm_duals")]:
                if key in cfg:
                    outer_kwargs[dest] = cfg[key]
            for key in ("mu", "tau", "alpha"):
                if key in cfg:
                    admm_kwargs[key] = cfg[key]

            def progress(rec, u):
                now = time.monotonic()
                if now - ses._published_at >= SNAPSHOT_INTERVAL:
                    ses.snapshot = {"k": rec.k + 1, "objective": rec.objective,
                                    "violations": rec.violations,
                                    "belt_px": rec.belt_px, "err": rec.err}
                    ses._published_at = now
                return not ses.cancel.is_set()

            result = solve_segmentation(
                ses.image, scribbles,
                outer=OuterParams(schedule="segment", **outer_kwargs),
                admm=AdmmParams(**admm_kwargs),
                seed=cfg.get("seed", 0), progress=progress)
            state = result.state
            ses.snapshot = {"k": state.k,
                            "objective": state.history[-1].objective,
                            "violations": state.history[-1].violations,
                            "belt_px": state.history[-1].belt_px,
                            "err": state.history[-1].err}
            label_bytes = encode_pnm(result.labels.astype(np.uint8))
            masks = {str(cid): base64.b64encode(
                         encode_pnm((m * np.uint8(255)))).decode()
                     for cid, m in enumerate(result.masks, start=1)}
            ses.result = {
                "label_map_p5": base64.b64encode(label_bytes).decode(),
                "masks_p5": masks,
                "report": {
                    "converged": state.converged,
                    "hit_cap": state.hit_cap,
                    "canceled": state.canceled,
                    "outer_iterations": state.k,
                    "rounds": ses.round_no,
                    "pinned_pixels": sum(len(s.pixels) for s in ses.strokes),
                    "objective_history": [r.objective for r in state.history],
                    "violation_history": [r.violations for r in state.history],
                },
            }
            ses.status = "canceled" if state.canceled else "done"
        except ConvexSegError as exc:
            ses.error = str(exc)
            ses.status = "failed"
        except Exception as exc:  # surface solver crashes to the client
            ses.error = f"{type(exc).__name__}: {exc}"
            ses.status = "failed"

    @app.post("/v1/sessions/{sid}/run", status_code=202)
    def run(sid: str):
        ses = get_session(sid)
        if ses is None:
            return _error(404, "unknown session")
        with ses.lock:
            if ses.status == "running":
                return _error(409, "solve already in progress")
            try:
                scribbles = ses.scribble_set()
                n = scribbles.num_classes
                if n < 2:
                    raise ValidationError("need scribbles for at least two classes")
                scribbles.require_all_classes(n)
            except ConvexSegError as exc:
                return _error(422, str(exc))
            ses.status = "running"
            ses.result = None
            ses.error = None
            ses.cancel.clear()
            ses.snapshot = {"k": 0}
            ses.thread = threading.Thread(target=_solve, args=(ses,), daemon=True)
            ses.thread.start()
        return {"status": "running"}

    @app.get("/v1/sessions/{sid}/status")
    def status(sid: str):
        ses = get_session(sid)
        if ses is None:
            return _error(404, "unknown session")
        out = {"status": ses.status, "rounds": ses.round_no}
        out.update(ses.snapshot)
        if ses.error:
            out["error"] = ses.error
        return out

    @app.get("/v1/sessions/{sid}/result")
    def result(sid: str):
        ses = get_session(sid)
        if ses is None:
            return _error(404, "unknown session")
        if ses.status == "failed":
            return _error(500, ses.error or "solver failed")
        if ses.status != "done" or ses.result is None:
            return _error(409, f"no result available (status {ses.status})")
        return ses.result

    @app.delete("/v1/sessions/{sid}", status_code=204)
    def delete(sid: str):
        ses = sessions.pop(sid, None)
        if ses is None:
            return _error(404, "unknown session")
        ses.cancel.set()
        return Response(status_code=204)

    _mount_frontend(app)
    return app


def _mount_frontend(app: FastAPI):
    """Serve the browser UI bundle when it has been built."""
    from pathlib import Path

    for candidate in (Path(__file__).resolve().parents[2] / "frontend" / "dist",
                      Path.cwd() / "frontend" / "dist"):
        if candidate.is_dir():
            from fastapi.staticfiles import StaticFiles

            app.mount("/", StaticFiles(directory=str(candidate), html=True),
                      name="frontend")
            break


def main(argv=None):
    import argparse

    import uvicorn

    ap = argparse.ArgumentParser(prog="convexseg-service")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8008)
    args = ap.parse_args(argv)
    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")


if __name__ == "__main__":
    main()
