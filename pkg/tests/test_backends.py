import json

import httpx
import pytest

from planloop.backends import (
    BackendError,
    BackendTimeout,
    BackendUnavailable,
    CallableBackend,
    RemoteBackend,
    RemoteConfig,
    RuleBackend,
    TaskParse,
    detect_task,
    family_plan,
    load_preamble,
    parse_vision,
)
from planloop.domain import FailureKind
from planloop.protocol import SessionRecord, Turn
from planloop.world import bundled_world_path, load_world

WORLD = load_world(bundled_world_path("apartment"))
VOCAB = WORLD.vocabulary()
CONTAINERS = frozenset(
    n for n, loc in WORLD.locations.items() if loc.container
)


@pytest.fixture
def policy():
    return RuleBackend(VOCAB, CONTAINERS)


def record(user, vision="", feasibility=1, history=()):
    return SessionRecord(tuple(history), user, vision, feasibility)


class TestTaskDetection:
    def test_fetch(self):
        assert detect_task("fetch me the coke", VOCAB) == TaskParse("fetch", "coke")

    def test_pick_with_alias_verb(self):
        assert detect_task("grab the orange", VOCAB) == TaskParse("pick", "orange")

    def test_go(self):
        assert detect_task("go to the table", VOCAB) == TaskParse("go", None, "table")

    def test_go_back(self):
        assert detect_task("go back", VOCAB) == TaskParse("go", None, "home")

    def test_put_with_plain_destination(self):
        assert detect_task("put the coke on the shelf", VOCAB) == TaskParse(
            "put", "coke", "shelf"
        )

    def test_put_away_into_container(self):
        assert detect_task("put the sponge away in the drawer", VOCAB) == TaskParse(
            "put", "sponge", "drawer"
        )

    def test_move_without_object_is_movement(self):
        assert detect_task("move to the shelf", VOCAB) == TaskParse(
            "go", None, "shelf"
        )

    def test_category_counts_as_object(self):
        assert detect_task("bring me something to drink", VOCAB) == TaskParse(
            "fetch", "drink"
        )

    def test_nonsense_is_none(self):
        assert detect_task("please sing a song", VOCAB) is None


class TestFamilyPlans:
    def test_fetch_goes_home(self):
        p = family_plan(TaskParse("fetch", "coke"), CONTAINERS)
        assert str(p) == "pick(coke) ; go(home) ; place(coke)"

    def test_put_into_container_opens_and_closes(self):
        p = family_plan(TaskParse("put", "sponge", "drawer"), CONTAINERS)
        assert str(p) == (
            "go(drawer) ; open(drawer) ; pick(sponge) ; "
            "place(sponge, drawer) ; close(drawer)"
        )

    def test_put_onto_surface(self):
        p = family_plan(TaskParse("put", "coke", "shelf"), CONTAINERS)
        assert str(p) == "pick(coke) ; go(shelf) ; place(coke, shelf)"


class TestVisionParsing:
    def test_three_clause_kinds(self):
        clauses = parse_vision(
            "found coke at (2.45, 3.50, 0.75); cannot find banana; "
            "found 2 items matching cup: blue_cup, red_cup"
        )
        assert [c.kind for c in clauses] == ["found", "missing", "multi"]
        assert clauses[0].position == (2.45, 3.5, 0.75)
        assert clauses[2].candidates == ("blue_cup", "red_cup")

    def test_empty_text(self):
        assert parse_vision("") == []


class TestRulePolicy:
    def test_fetch_plan(self, policy):
        r = record("fetch me the coke", "found coke at (2.45, 3.50, 0.75)", 1)
        assert policy.reply(r) == "PLAN: pick(coke) ; go(home) ; place(coke)"

    def test_go_has_empty_vision(self, policy):
        assert policy.reply(record("go to the table")) == "PLAN: go(table)"

    def test_put_in_drawer_sequence(self, policy):
        r = record("put the sponge in the drawer", "found sponge at (3.05, 3.50, 0.75)", 1)
        assert policy.reply(r) == (
            "PLAN: go(drawer) ; open(drawer) ; pick(sponge) ; "
            "place(sponge, drawer) ; close(drawer)"
        )

    def test_missing_object_wins_over_everything(self, policy):
        r = record("fetch me the coke", "cannot find coke", 1)
        assert policy.reply(r) == "FAILURE(vision): cannot find coke"

    def test_ambiguous_instance_reference(self, policy):
        r = record(
            "fetch me the cup", "found 2 items matching cup: blue_cup, red_cup", 1
        )
        out = policy.reply(r)
        assert out.startswith("FAILURE(ambiguous_reference)")
        assert "blue_cup, red_cup" in out

    def test_ambiguous_category_is_a_task_ambiguity(self, policy):
        r = record(
            "bring me something to drink",
            "found 3 items matching drink: 7up, coke, water",
            1,
        )
        assert policy.reply(r).startswith("FAILURE(ambiguous_task)")

    def test_seen_but_unreachable(self, policy):
        r = record("fetch me the orange", "found orange at (0.60, 4.75, 0.50)", 0)
        assert policy.reply(r) == "FAILURE(feasibility): cannot reach orange"

    def test_container_hint_recovers_after_reach_failure(self, policy):
        history = (
            Turn("user", "fetch me the orange"),
            Turn("robot", "FAILURE(feasibility): cannot reach orange"),
        )
        r = record(
            "it is in the cupboard, open it first",
            "found orange at (0.60, 4.75, 0.50)",
            0,
            history,
        )
        assert policy.reply(r) == (
            "PLAN: go(cupboard) ; open(cupboard) ; pick(orange) ; "
            "go(home) ; place(orange)"
        )

    def test_container_hint_recovers_after_vision_failure(self, policy):
        history = (
            Turn("user", "fetch me the coke"),
            Turn("robot", "FAILURE(vision): cannot find coke"),
        )
        r = record("it is in the cupboard", "cannot find coke", 1, history)
        assert policy.reply(r) == (
            "PLAN: go(cupboard) ; open(cupboard) ; pick(coke) ; "
            "go(home) ; place(coke)"
        )

    def test_candidate_choice_resumes_the_original_task(self, policy):
        history = (
            Turn("user", "fetch me the cup"),
            Turn(
                "robot",
                "FAILURE(ambiguous_reference): found 2 items matching cup: "
                "blue_cup, red_cup; which one do you mean?",
            ),
        )
        r = record(
            "the red cup please",
            "found 2 items matching cup: blue_cup, red_cup; "
            "found red_cup at (2.75, 3.45, 0.75)",
            1,
            history,
        )
        assert policy.reply(r) == "PLAN: pick(red_cup) ; go(home) ; place(red_cup)"

    def test_candidate_choice_keeps_a_put_family(self, policy):
        history = (
            Turn("user", "put a cup in the drawer"),
            Turn(
                "robot",
                "FAILURE(ambiguous_reference): found 2 items matching cup: "
                "blue_cup, red_cup; which one do you mean?",
            ),
        )
        r = record(
            "the blue cup",
            "found 2 items matching cup: blue_cup, red_cup; "
            "found blue_cup at (2.85, 3.50, 0.75)",
            1,
            history,
        )
        assert policy.reply(r) == (
            "PLAN: go(drawer) ; open(drawer) ; pick(blue_cup) ; "
            "place(blue_cup, drawer) ; close(drawer)"
        )

    def test_execution_failure_retries_the_remainder(self, policy):
        history = (
            Turn("user", "fetch me the orange"),
            Turn(
                "robot",
                "FAILURE(execution): failed to execute pick(orange): slip; "
                "remaining steps: pick(orange) ; go(home) ; place(orange)",
            ),
        )
        r = record("try again", "found orange at (2.15, 3.45, 0.75)", 1, history)
        assert policy.reply(r) == "PLAN: pick(orange) ; go(home) ; place(orange)"

    def test_unclear_request(self, policy):
        assert policy.reply(record("do the thing")) == (
            "FAILURE(ambiguous_task): cannot determine the task; "
            "please rephrase the request"
        )

    def test_unique_survivor_substitutes_the_instance(self, policy):
        r = record("fetch me a cup", "found red_cup at (2.75, 3.45, 0.75)", 1)
        assert policy.reply(r) == "PLAN: pick(red_cup) ; go(home) ; place(red_cup)"

    def test_decide_returns_typed_results(self, policy):
        out = policy.decide(record("fetch me the coke", "cannot find coke", 1))
        assert out.kind is FailureKind.VISION


def completion(text):
    return {"choices": [{"message": {"role": "assistant", "content": text}}]}


class TestRemoteBackend:
    def _backend(self, handler, **kwargs):
        transport = httpx.MockTransport(handler)
        return RemoteBackend(
            "http://planner.test/v1/chat/completions",
            client=httpx.Client(transport=transport),
            **kwargs,
        )

    def test_sends_a_chat_completion_request(self):
        captured = {}

        def handler(request):
            captured["body"] = json.loads(request.read())
            return httpx.Response(200, json=completion("PLAN: pick(coke)"))

        backend = self._backend(handler, model="planner-7b")
        out = backend.reply(
            record("fetch me the coke", "found coke at (2.45, 3.50, 0.75)", 1)
        )
        assert out == "PLAN: pick(coke)"
        body = captured["body"]
        assert body["model"] == "planner-7b"
        assert body["temperature"] == 0
        assert body["max_tokens"] == 256
        roles = [m["role"] for m in body["messages"]]
        assert roles == ["system", "user"]
        assert "<history> none" in body["messages"][1]["content"]

    def test_system_message_is_the_shipped_preamble(self):
        def handler(request):
            return httpx.Response(200, json=completion("PLAN: go(home)"))

        backend = self._backend(handler)
        body = backend.request_body(record("go back"))
        assert body["messages"][0]["content"] == load_preamble()
        assert "PLAN:" in body["messages"][0]["content"]
        assert "FAILURE(kind):" in body["messages"][0]["content"]

    def test_completion_text_is_returned_verbatim(self):
        text = "Sure thing!\nPLAN: pick(coke)"
        backend = self._backend(
            lambda req: httpx.Response(200, json=completion(text))
        )
        assert backend.reply(record("fetch me the coke")) == text

    def test_complete_records_latency(self):
        backend = self._backend(
            lambda req: httpx.Response(200, json=completion("PLAN: go(home)"))
        )
        out = backend.complete(record("go back"))
        assert out.text == "PLAN: go(home)"
        assert out.latency >= 0

    def test_http_error_raises_backend_error(self):
        backend = self._backend(lambda req: httpx.Response(500, text="boom"))
        with pytest.raises(BackendError):
            backend.reply(record("hi"))

    def test_malformed_body_raises_backend_error(self):
        backend = self._backend(lambda req: httpx.Response(200, json={"nope": 1}))
        with pytest.raises(BackendError):
            backend.reply(record("hi"))

    def test_timeout_raises_its_own_error(self):
        def handler(request):
            raise httpx.ReadTimeout("slow", request=request)

        backend = self._backend(handler)
        with pytest.raises(BackendTimeout):
            backend.reply(record("hi"))

    def test_unreachable_raises_its_own_error(self):
        def handler(request):
            raise httpx.ConnectError("refused", request=request)

        backend = self._backend(handler)
        with pytest.raises(BackendUnavailable):
            backend.reply(record("hi"))

    def test_both_remote_errors_are_backend_errors(self):
        assert issubclass(BackendTimeout, BackendError)
        assert issubclass(BackendUnavailable, BackendError)

    def test_callable_backend_passthrough(self):
        backend = CallableBackend(lambda rec: "PLAN: go(home)")
        assert backend.reply(record("go back")) == "PLAN: go(home)"


class TestCapturedExchange:
    """The shipped fixture is a real captured request/response pair. It
    pins the wire schema: if serialization or the request shape drifts,
    regenerate the fixture deliberately."""

    @pytest.fixture()
    def fixture(self):
        from importlib import resources

        raw = (
            resources.files("planloop")
            .joinpath("data/fixtures/remote_exchange.json")
            .read_text("utf-8")
        )
        return json.loads(raw)

    def _record(self):
        return SessionRecord(
            (
                Turn("user", "bring me the coke"),
                Turn("robot", "FAILURE(vision): I cannot see any coke | subject=coke"),
            ),
            "try the fridge",
            "cannot find coke",
            0,
        )

    def test_request_matches_the_fixture(self, fixture):
        backend = RemoteBackend("http://127.0.0.1:8090/v1/chat/completions")
        assert backend.request_body(self._record()) == fixture["request"]

    def test_fixture_response_parses(self, fixture):
        transport = httpx.MockTransport(
            lambda req: httpx.Response(200, json=fixture["response"])
        )
        backend = RemoteBackend(
            "http://127.0.0.1:8090/v1/chat/completions",
            client=httpx.Client(transport=transport),
        )
        out = backend.reply(self._record())
        assert out == fixture["response"]["choices"][0]["message"]["content"]
        assert out.startswith("PLAN: go(fridge)")


class TestRemoteConfig:
    @pytest.fixture(autouse=True)
    def _clean_env(self, monkeypatch):
        for var in (
            "PLANLOOP_REMOTE_URL",
            "PLANLOOP_REMOTE_MODEL",
            "PLANLOOP_REMOTE_TIMEOUT",
            "PLANLOOP_REMOTE_MAX_TOKENS",
        ):
            monkeypatch.delenv(var, raising=False)

    def test_explicit_endpoint_with_defaults(self):
        cfg = RemoteConfig.load(endpoint="http://planner.test/v1")
        assert cfg.endpoint == "http://planner.test/v1"
        assert cfg.model == "planner"
        assert cfg.timeout == 30.0
        assert cfg.max_output_tokens == 256

    def test_config_file_supplies_everything(self, tmp_path):
        path = tmp_path / "remote.toml"
        path.write_text(
            'endpoint = "http://planner.test/v1"\n'
            'model = "tuned-8b"\n'
            "timeout = 5.5\n"
            "max_output_tokens = 64\n"
        )
        cfg = RemoteConfig.load(path)
        assert cfg == RemoteConfig("http://planner.test/v1", "tuned-8b", 5.5, 64)

    def test_environment_overrides_the_file(self, tmp_path, monkeypatch):
        path = tmp_path / "remote.toml"
        path.write_text('endpoint = "http://file.test"\nmodel = "from-file"\n')
        monkeypatch.setenv("PLANLOOP_REMOTE_URL", "http://env.test")
        monkeypatch.setenv("PLANLOOP_REMOTE_MODEL", "from-env")
        monkeypatch.setenv("PLANLOOP_REMOTE_TIMEOUT", "2.5")
        cfg = RemoteConfig.load(path)
        assert cfg.endpoint == "http://env.test"
        assert cfg.model == "from-env"
        assert cfg.timeout == 2.5

    def test_explicit_endpoint_beats_environment(self, monkeypatch):
        monkeypatch.setenv("PLANLOOP_REMOTE_URL", "http://env.test")
        cfg = RemoteConfig.load(endpoint="http://arg.test")
        assert cfg.endpoint == "http://arg.test"

    def test_no_endpoint_anywhere_is_an_error(self, monkeypatch):
        monkeypatch.delenv("PLANLOOP_REMOTE_URL", raising=False)
        with pytest.raises(ValueError):
            RemoteConfig.load()

    def test_from_config_builds_a_working_client(self):
        cfg = RemoteConfig("http://planner.test/v1", "tuned-8b", 5.0, 64)
        backend = RemoteBackend.from_config(cfg)
        assert backend.url == cfg.endpoint
        assert backend.model == "tuned-8b"
        assert backend.max_output_tokens == 64
