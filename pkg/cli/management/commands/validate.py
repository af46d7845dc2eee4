from django.core.management.base import CommandError

from annotations.documents import RelevanceBundle, iter_records, parse_record, validate_relevance_against
from annotations.errors import AnnotationValidationError

from cli.base import DOMAIN_ERROR, ScenePickCommand


class Command(ScenePickCommand):
    help = ("Check annotation documents and relevance files against the schema, and relevance "
            "files against the document of the same video.")

    def add_command_arguments(self, parser):
        parser.add_argument("paths", nargs="+", help=".json record, .jsonl corpus, or a directory of them")
        parser.add_argument("--all", dest="report_all", action="store_true",
                            help="Keep going and report every violation of every record")

    def report(self, label, exc, report_all):
        violations = exc.violations if report_all else [exc.first]
        for violation in violations:
            self.stderr.write(f"{label}: {violation} [{violation.code}]")
        self.invalid.append({"record": label, "violations": [v.to_json() for v in violations]})

    def check_records(self, paths, report_all):
        documents, bundles = {}, []
        for path in paths:
            for label, raw in iter_records(path):
                self.checked += 1
                try:
                    record = parse_record(raw)
                except AnnotationValidationError as exc:
                    self.report(label, exc, report_all)
                    if not report_all:
                        return
                    continue
                if isinstance(record, RelevanceBundle):
                    bundles.append((label, record))
                else:
                    documents[record.video_id] = record

        # relevance files without a document of their own have nothing to be checked against
        for label, bundle in bundles:
            document = documents.get(bundle.video_id)
            if document is None:
                continue
            try:
                validate_relevance_against(bundle, document)
            except AnnotationValidationError as exc:
                self.report(label, exc, report_all)
                if not report_all:
                    return

    def run(self, paths, report_all, **options):
        self.checked, self.invalid = 0, []
        self.check_records(paths, report_all)

        checked, invalid = self.checked, self.invalid
        self.emit({"checked": checked, "invalid": len(invalid), "records": invalid}, options.get("out"))
        if invalid:
            raise CommandError(f"{len(invalid)} of {checked} records are invalid", returncode=DOMAIN_ERROR)
        return None
