import json
from dataclasses import replace
from pathlib import Path

from engine.errors import InvalidParameterError
from engine.reward import AnswerDistribution, reward, score_group

from cli.base import ScenePickCommand


def _distribution(record, where: str) -> AnswerDistribution:
    if not isinstance(record, dict) or not isinstance(record.get("probs"), list):
        raise InvalidParameterError(f"{where}: expected an object with a 'probs' list")
    correct = record.get("correct")
    if not isinstance(correct, int) or isinstance(correct, bool):
        raise InvalidParameterError(f"{where}: 'correct' must be an integer index")
    return AnswerDistribution.from_probabilities(record["probs"], correct, record.get("labels"))


class Command(ScenePickCommand):
    help = "Score answer distributions with the likelihood-ratio reward."

    def add_command_arguments(self, parser):
        parser.add_argument("path", metavar="input", help='JSON {"probs": [...], "correct": i, "tau": t}, or JSON lines with --batch')
        parser.add_argument("--batch", action="store_true",
                            help='Each line is a group: a list of distributions or {"group": [...], "tau": t}')
        parser.add_argument("--tau", type=float, help="Temperature; overrides a tau given in the input")
        parser.add_argument("--probability-floor", dest="probability_floor", type=float)

    def _config(self, record, tau_flag):
        config = self.config.reward()
        if tau_flag is None and isinstance(record, dict) and record.get("tau") is not None:
            config = replace(config, temperature=float(record["tau"]))
        return config

    def run(self, path, batch, tau, **options):
        path = Path(path)
        if not batch:
            record = json.loads(path.read_bytes())
            return {"reward": reward(_distribution(record, str(path)), self._config(record, tau))}

        lines = []
        with path.open("rb") as handle:
            for number, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                where = f"{path}:{number}"
                group = json.loads(line)
                members = group.get("group") if isinstance(group, dict) else group
                if not isinstance(members, list):
                    raise InvalidParameterError(f"{where}: expected a list of distributions")
                distributions = [_distribution(member, where) for member in members]
                lines.append(json.dumps(score_group(distributions, self._config(group, tau))))
        return "\n".join(lines) + "\n" if lines else ""
