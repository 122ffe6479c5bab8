from pathlib import Path

from starlette.templating import Jinja2Templates


def fixed4(value: float) -> str:
    return f"{value:.4f}"


def signed4(value: float) -> str:
    return f"{value:+.4f}"


_templates = Jinja2Templates(Path(__file__).parent)
_templates.env.filters["fixed4"] = fixed4
_templates.env.filters["signed4"] = signed4
# plain text output
_templates.env.autoescape = False
_templates.env.trim_blocks = True
_templates.env.lstrip_blocks = True
_templates.env.keep_trailing_newline = True


def render(name: str, **context: object) -> str:
    return _templates.get_template(name).render(context)
