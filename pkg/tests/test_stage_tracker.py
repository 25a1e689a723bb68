from datetime import datetime, timedelta

import pytest

from core.errors import CompileTimeoutError
from handlers.stage_tracker import StageStatus, StageTracker, TimeoutManager


class TestTimeoutManager:

    def test_not_started_has_no_elapsed_time(self):
        manager = TimeoutManager(max_seconds=10)
        assert manager.elapsed() == 0.0
        assert not manager.is_expired()

    def test_expired_budget_raises(self):
        manager = TimeoutManager(max_seconds=5).start()
        manager.start_time = datetime.now() - timedelta(seconds=6)
        assert manager.is_expired()
        with pytest.raises(CompileTimeoutError):
            manager.check("in test")

    def test_default_budget_from_config(self, monkeypatch):
        import config
        monkeypatch.setenv("NARROWFORGE_COMPILE_TIMEOUT", "42")
        config.reload_config()
        assert TimeoutManager().max_seconds == 42.0


class TestStageTracker:

    def test_lifecycle(self):
        tracker = StageTracker(max_seconds=60).start()
        tracker.begin_stage("stage 0", budget=1e-3)
        tracker.complete_stage("stage 0", 5e-4, width=3)
        tracker.begin_stage("stage 1")
        tracker.fail_stage("stage 1", "slice values not increasing")
        assert [r.status for r in tracker.stages] == [StageStatus.COMPLETED, StageStatus.FAILED]
        assert tracker.per_stage_errors() == [5e-4, None]
        status = tracker.get_status()
        assert status["stages"][0]["details"] == {"width": 3}
        assert status["stages"][0]["budget"] == 1e-3
        assert status["stages"][1]["message"] == "slice values not increasing"

    def test_restarting_a_stage_reuses_its_record(self):
        tracker = StageTracker()
        tracker.begin_stage("slice 1/4")
        tracker.begin_stage("slice 1/4")
        assert len(tracker.stages) == 1
        assert tracker.stages[0].status == StageStatus.RUNNING

    def test_begin_after_budget_raises(self):
        tracker = StageTracker(max_seconds=1).start()
        tracker.timeout.start_time = datetime.now() - timedelta(seconds=2)
        with pytest.raises(CompileTimeoutError):
            tracker.begin_stage("late")
