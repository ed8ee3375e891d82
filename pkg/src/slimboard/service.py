"""HTTP onboarding service: questions in, ratings back, recommendations out.

Sessions live in memory behind unguessable tokens. Every state change is
appended to a JSONL transcript that can be replayed to the identical
recommendation list; recommendation feedback additionally lands in a CSV
log together with the session's method, which is never exposed to clients.
"""

import csv
import json
import re
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .elicitation import (
    BanditQuestionnaire,
    Questionnaire,
    SessionState,
    bandit_recommend,
    q_gslim,
)
from .errors import ConflictError, NotFoundError, ValidationError
from .interactions import InteractionMatrix, PopularitySplit, load_dataset, short_head_split
from .lfm import LfmModel, load_lfm
from .slim import SlimModel, load_model, top_n

DEFAULT_NUM_QUESTIONS = 10
DEFAULT_NUM_RECS = 10
METHODS = ("gslim", "bandit")
VERDICTS = ("bad", "good", "very_good", "dont_know")

_TITLE_YEAR = re.compile(r"^(?P<title>.*?)\s*\((?P<year>\d{4})\)\s*$")


@dataclass(frozen=True)
class ItemCard:
    """Presentable item metadata; resolves an internal index to catalog facts."""

    item: int
    external_id: str
    title: str
    year: int | None = None
    genres: tuple[str, ...] = ()
    poster_url: str | None = None
    abstract: str | None = None

    def to_dict(self) -> dict:
        return {
            "item": self.item,
            "external_id": self.external_id,
            "title": self.title,
            "year": self.year,
            "genres": list(self.genres),
            "poster_url": self.poster_url,
            "abstract": self.abstract,
        }


def load_catalog(path) -> dict[str, dict]:
    """Parse a `movieId,title,genres` CSV into per-external-id metadata."""
    catalog: dict[str, dict] = {}
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        required = {"movieId", "title", "genres"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(f"catalog must have columns {sorted(required)}")
        for row in reader:
            title = row["title"].strip()
            year = None
            match = _TITLE_YEAR.match(title)
            if match:
                title = match.group("title")
                year = int(match.group("year"))
            genres = tuple(
                g for g in (row["genres"] or "").split("|") if g and g != "(no genres listed)"
            )
            catalog[row["movieId"].strip()] = {
                "title": title,
                "year": year,
                "genres": genres,
                "poster_url": (row.get("poster_url") or None),
                "abstract": (row.get("abstract") or None),
            }
    return catalog


@dataclass
class ServingBundle:
    """Everything the service needs, loaded once and shared read-only."""

    X_train: InteractionMatrix
    slim_model: SlimModel
    lfm_model: LfmModel
    pop: PopularitySplit
    catalog: dict[str, dict] = field(default_factory=dict)
    blocked: frozenset[int] = frozenset()
    num_questions: int = DEFAULT_NUM_QUESTIONS
    num_recs: int = DEFAULT_NUM_RECS
    sigma: float = 1.0
    transcript_path: Path | None = None
    feedback_path: Path | None = None

    def item_card(self, item: int) -> ItemCard:
        external = self.X_train.item_ids[item]
        meta = self.catalog.get(external, {})
        return ItemCard(
            item=item,
            external_id=external,
            title=meta.get("title") or f"Item {external}",
            year=meta.get("year"),
            genres=tuple(meta.get("genres", ())),
            poster_url=meta.get("poster_url"),
            abstract=meta.get("abstract"),
        )

    def questionnaire(self, method: str) -> Questionnaire:
        if method == "gslim":
            return q_gslim(self.slim_model, min_length=self.num_questions)
        if method == "bandit":
            return BanditQuestionnaire(self.lfm_model, sigma=self.sigma)
        raise ValidationError(f"unknown method {method!r}")

    def recommend(self, method: str, state: SessionState, num_recs: int) -> list[int]:
        mask = self.pop.long_tail_mask(self.X_train.num_items)
        if state.asked:
            mask[state.asked] = False
        mask[state.x != 0.0] = False
        if self.blocked:
            mask[list(self.blocked)] = False
        allowed = np.flatnonzero(mask)
        if method == "gslim":
            return top_n(state.x, self.slim_model, num_recs, allowed)
        return bandit_recommend(state, self.lfm_model, num_recs, allowed)


def load_blocklist(path, item_index: dict[str, int]) -> frozenset[int]:
    """Read external item ids to keep out of recommendation lists.

    One id per line; blank lines and `#` comments are skipped.  Ids that
    are not part of the training item space are rejected, since a typo
    there would silently unblock the item it was meant to hide.
    """
    blocked = set()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        token = raw.split("#", 1)[0].strip()
        if not token:
            continue
        if token not in item_index:
            raise ValidationError(f"blocklist line {lineno}: unknown item {token!r}")
        blocked.add(item_index[token])
    return frozenset(blocked)


def load_bundle(
    train_dataset,
    slim_path,
    lfm_path,
    catalog_path=None,
    coverage: float = 0.33,
    num_questions: int = DEFAULT_NUM_QUESTIONS,
    num_recs: int = DEFAULT_NUM_RECS,
    sigma: float = 1.0,
    transcript_path=None,
    feedback_path=None,
    blocklist_path=None,
) -> ServingBundle:
    X_train = load_dataset(train_dataset)
    slim_model = load_model(slim_path)
    lfm_model = load_lfm(lfm_path)
    if slim_model.num_items != X_train.num_items:
        raise ValidationError("item-item model does not match the training data")
    if lfm_model.num_items != X_train.num_items:
        raise ValidationError("factor model does not match the training data")
    catalog = load_catalog(catalog_path) if catalog_path else {}
    blocked = frozenset()
    if blocklist_path:
        item_index = {ext: i for i, ext in enumerate(X_train.item_ids)}
        blocked = load_blocklist(blocklist_path, item_index)
    return ServingBundle(
        X_train=X_train,
        slim_model=slim_model,
        lfm_model=lfm_model,
        pop=short_head_split(X_train, coverage),
        catalog=catalog,
        blocked=blocked,
        num_questions=num_questions,
        num_recs=num_recs,
        sigma=sigma,
        transcript_path=Path(transcript_path) if transcript_path else None,
        feedback_path=Path(feedback_path) if feedback_path else None,
    )


@dataclass
class OnboardingSession:
    """One participant's pass through questions, recommendations, feedback."""

    id: str
    method: str
    seed: int
    num_questions: int
    num_recs: int
    questionnaire: Questionnaire
    state: SessionState
    created_at: float
    phase: str = "questioning"
    pending_question: int | None = None
    recommendations: list[int] | None = None
    feedback: dict[int, str] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    """In-memory session registry plus the append-only logs."""

    def __init__(self, bundle: ServingBundle) -> None:
        self.bundle = bundle
        self.sessions: dict[str, OnboardingSession] = {}
        self._registry_lock = threading.Lock()
        self._log_lock = threading.Lock()

    # -- logging -------------------------------------------------------------

    def _append_transcript(self, event: dict) -> None:
        if self.bundle.transcript_path is None:
            return
        line = json.dumps(event, sort_keys=True)
        with self._log_lock:
            with open(self.bundle.transcript_path, "a", encoding="utf-8") as f:
                f.write(line + "\n")

    def _append_feedback(self, session: OnboardingSession, item: int, verdict: str) -> None:
        if self.bundle.feedback_path is None:
            return
        new_file = not self.bundle.feedback_path.exists()
        with self._log_lock:
            with open(self.bundle.feedback_path, "a", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                if new_file:
                    writer.writerow(
                        ["session", "method", "item_internal", "item_external", "verdict"]
                    )
                writer.writerow(
                    [
                        session.id,
                        session.method,
                        item,
                        self.bundle.X_train.item_ids[item],
                        verdict,
                    ]
                )

    # -- session operations ----------------------------------------------------

    def create_session(
        self,
        method: str,
        num_questions: int | None = None,
        num_recs: int | None = None,
        seed: int | None = None,
    ) -> OnboardingSession:
        if method == "random":
            method = secrets.choice(METHODS)
        if method not in METHODS:
            raise ValidationError(f"unknown method {method!r}")
        if num_questions is None:
            num_questions = self.bundle.num_questions
        if num_recs is None:
            num_recs = self.bundle.num_recs
        if num_questions < 1 or num_recs < 1:
            raise ValidationError("num_questions and num_recs must be at least 1")
        if num_questions >= self.bundle.X_train.num_items:
            raise ValidationError("num_questions must be below the item count")
        if method == "gslim" and len(self.bundle.slim_model.rows) < num_questions:
            raise ValidationError(
                f"trained questionnaire has {len(self.bundle.slim_model.rows)} rows, "
                f"{num_questions} questions requested"
            )
        if seed is None:
            seed = secrets.randbits(32)
        questionnaire = self.bundle.questionnaire(method)
        state = questionnaire.new_state(self.bundle.X_train.num_items, seed)
        session = OnboardingSession(
            id=secrets.token_urlsafe(16),
            method=method,
            seed=int(seed),
            num_questions=int(num_questions),
            num_recs=int(num_recs),
            questionnaire=questionnaire,
            state=state,
            created_at=time.time(),
        )
        session.pending_question = questionnaire.next_question(state)
        with self._registry_lock:
            self.sessions[session.id] = session
        self._append_transcript(
            {
                "event": "create",
                "session": session.id,
                "method": session.method,
                "seed": session.seed,
                "num_questions": session.num_questions,
                "num_recs": session.num_recs,
                "created_at": session.created_at,
            }
        )
        return session

    def get(self, session_id: str) -> OnboardingSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise NotFoundError("unknown session")

    def submit_answer(self, session_id: str, item: int, rating: int) -> OnboardingSession:
        session = self.get(session_id)
        with session.lock:
            if session.phase != "questioning":
                raise ConflictError("session is no longer accepting answers")
            if session.pending_question is None or item != session.pending_question:
                raise ConflictError(
                    f"item {item} is not the pending question "
                    f"({session.pending_question})"
                )
            if rating not in (0, 1, 2, 3, 4, 5):
                raise ValidationError("rating must be an integer from 0 to 5")
            session.questionnaire.observe(session.state, item, float(rating))
            self._append_transcript(
                {
                    "event": "answer",
                    "session": session.id,
                    "item": item,
                    "rating": int(rating),
                    "position": len(session.state.asked),
                }
            )
            if len(session.state.asked) >= session.num_questions:
                session.pending_question = None
                session.phase = "recommending"
            else:
                session.pending_question = session.questionnaire.next_question(session.state)
                if session.pending_question is None:
                    session.phase = "recommending"
        return session

    def get_recommendations(self, session_id: str) -> list[int]:
        session = self.get(session_id)
        with session.lock:
            if session.phase == "questioning":
                raise ConflictError("session is still asking questions")
            if session.recommendations is None:
                session.recommendations = self.bundle.recommend(
                    session.method, session.state, session.num_recs
                )
                session.phase = "done"
                self._append_transcript(
                    {
                        "event": "recommendations",
                        "session": session.id,
                        "items": list(session.recommendations),
                    }
                )
            return list(session.recommendations)

    def submit_feedback(self, session_id: str, item: int, verdict: str) -> None:
        session = self.get(session_id)
        with session.lock:
            if session.recommendations is None:
                raise ConflictError("recommendations were not issued yet")
            if verdict not in VERDICTS:
                raise ValidationError(f"verdict must be one of {VERDICTS}")
            if item not in session.recommendations:
                raise ValidationError(f"item {item} was not recommended in this session")
            session.feedback[item] = verdict
            self._append_transcript(
                {
                    "event": "feedback",
                    "session": session.id,
                    "item": item,
                    "verdict": verdict,
                }
            )
            self._append_feedback(session, item, verdict)


def replay_transcript(transcript_path, bundle: ServingBundle) -> dict[str, dict]:
    """Re-run every logged session; return replayed vs logged recommendations.

    A session replays by rebuilding its questionnaire from the stored method
    and seed and feeding the logged answers back in.
    """
    sessions: dict[str, dict] = {}
    with open(transcript_path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            event = json.loads(line)
            kind = event["event"]
            if kind == "create":
                sessions[event["session"]] = {
                    "method": event["method"],
                    "seed": event["seed"],
                    "num_recs": event["num_recs"],
                    "answers": [],
                    "logged": None,
                }
            elif kind == "answer":
                sessions[event["session"]]["answers"].append(
                    (event["item"], event["rating"])
                )
            elif kind == "recommendations":
                sessions[event["session"]]["logged"] = list(event["items"])

    out: dict[str, dict] = {}
    for sid, record in sessions.items():
        questionnaire = bundle.questionnaire(record["method"])
        state = questionnaire.new_state(bundle.X_train.num_items, record["seed"])
        for item, rating in record["answers"]:
            expected = questionnaire.next_question(state)
            if expected != item:
                raise ValidationError(
                    f"session {sid}: transcript asks {item}, replay asks {expected}"
                )
            questionnaire.observe(state, item, float(rating))
        replayed = bundle.recommend(record["method"], state, record["num_recs"])
        out[sid] = {"logged": record["logged"], "replayed": replayed}
    return out


# -- HTTP layer ----------------------------------------------------------------------


def create_app(bundle: ServingBundle, webui_dir=None):
    """Build the FastAPI application around a loaded bundle."""
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse
    from pydantic import BaseModel

    app = FastAPI(title="slimboard onboarding", version="1")
    store = SessionStore(bundle)
    app.state.store = store

    class CreateSessionBody(BaseModel):
        method: str = "random"
        num_questions: int | None = None
        num_recs: int | None = None
        seed: int | None = None

    class AnswerBody(BaseModel):
        item: int
        rating: int

    class FeedbackBody(BaseModel):
        item: int
        verdict: str

    @app.exception_handler(ValidationError)
    async def _validation(request: Request, exc: ValidationError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(NotFoundError)
    async def _not_found(request: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ConflictError)
    async def _conflict(request: Request, exc: ConflictError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    def question_payload(session: OnboardingSession) -> dict:
        card = None
        if session.pending_question is not None:
            card = bundle.item_card(session.pending_question).to_dict()
        return {
            "session_id": session.id,
            "phase": session.phase,
            "answered": len(session.state.asked),
            "total": session.num_questions,
            "question": card,
        }

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = store.create_session(
            body.method, body.num_questions, body.num_recs, body.seed
        )
        return question_payload(session)

    @app.get("/sessions/{session_id}/question")
    def get_question(session_id: str):
        return question_payload(store.get(session_id))

    @app.post("/sessions/{session_id}/answers")
    def submit_answer(session_id: str, body: AnswerBody):
        session = store.submit_answer(session_id, body.item, body.rating)
        return question_payload(session)

    @app.get("/sessions/{session_id}/recommendations")
    def get_recommendations(session_id: str):
        items = store.get_recommendations(session_id)
        session = store.get(session_id)
        return {
            "session_id": session_id,
            "phase": session.phase,
            "items": [bundle.item_card(i).to_dict() for i in items],
        }

    @app.post("/sessions/{session_id}/feedback")
    def submit_feedback(session_id: str, body: FeedbackBody):
        store.submit_feedback(session_id, body.item, body.verdict)
        return {"ok": True}

    @app.get("/items/{external_id}")
    def get_item(external_id: str):
        try:
            item = bundle.X_train.item_index(external_id)
        except KeyError:
            raise NotFoundError(f"unknown item {external_id!r}")
        return bundle.item_card(item).to_dict()

    if webui_dir is not None and Path(webui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(webui_dir), html=True), name="webui")

    return app
