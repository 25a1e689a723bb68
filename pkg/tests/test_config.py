from config import Config, get_config, reload_config


class TestConfig:

    def test_defaults(self):
        cfg = get_config()
        assert cfg.seed == 0
        assert cfg.positivity_margin == 1.0
        assert cfg.fit_max_terms == 256
        assert cfg.threads >= 1

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("NARROWFORGE_SEED", "17")
        monkeypatch.setenv("NARROWFORGE_THREADS", "0")
        monkeypatch.setenv("NARROWFORGE_LOG_LEVEL", "debug")
        monkeypatch.setenv("NARROWFORGE_FIT_BETA", "0.05")
        cfg = reload_config()
        assert cfg.seed == 17
        assert cfg.threads == 1
        assert cfg.log_level == "DEBUG"
        assert cfg.fit_beta == 0.05

    def test_instance_is_cached(self):
        assert get_config() is get_config()

    def test_to_dict(self):
        payload = Config().to_dict()
        assert payload["app_name"] == "narrowforge"
        assert "sharpen_max_steps" in payload
