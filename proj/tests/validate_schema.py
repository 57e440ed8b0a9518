"""Runs `fullcc analyze` on small fixtures and validates the reports against the schema."""

import json
import pathlib
import subprocess
import sys
import tempfile

import jsonschema


def main() -> int:
    cli, schema_path, fixtures = sys.argv[1], pathlib.Path(sys.argv[2]), pathlib.Path(sys.argv[3])
    schema = json.loads(schema_path.read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    validator = jsonschema.Draft202012Validator(schema)
    with tempfile.TemporaryDirectory() as out:
        cmd = [cli, "analyze", "--out", out, "--samples", "5"]
        for stem in ("h2_sto6g", "lih_sto6g"):
            cmd += ["--input", str(fixtures / f"{stem}.fcidump")]
        subprocess.run(cmd, check=True)
        reports = sorted(pathlib.Path(out).glob("*_analysis.json"))
        if len(reports) != 2:
            print(f"expected 2 reports, found {len(reports)}")
            return 1
        failed = 0
        for path in reports:
            errors = list(validator.iter_errors(json.loads(path.read_text())))
            for e in errors:
                print(f"{path.name}: {'/'.join(map(str, e.path))}: {e.message}")
            failed += bool(errors)
            print(f"{path.name}: {'invalid' if errors else 'valid'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
