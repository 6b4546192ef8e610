from flask import request
from flask_restful import Resource
from core.errors import OracleError
from database.manifests import harness_config, manifest_from_json, manifest_sequence, parse_free_set
from lab.harness import run_continuity_harness
from lab.verify import verify_all
from routes.entropy_routes import json_number
import logging

logger = logging.getLogger(__name__)

MAX_VERIFY_COUNT = 500


class SequencesResource(Resource):
    def post(self):
        try:
            data = request.get_json(silent=True)
            if not data or 'manifest' not in data:
                return {'success': False, 'message': 'Manifest required'}, 400

            manifest = manifest_from_json(data['manifest'])
            if any(d.startswith('hull:') for d in manifest.models):
                return {'success': False, 'message': 'Hull descriptors are only available from the command line'}, 400

            logger.info(f"Sequences POST - family={manifest.family}, models={list(manifest.models)}")
            seq = manifest_sequence(manifest)
            models = [parse_free_set(d, seq.layout) for d in manifest.models]
            report = run_continuity_harness(seq, models, harness_config(manifest))

            rows = []
            for row in report.rows:
                rows.append({key: json_number(value) if isinstance(value, float) else value
                             for key, value in row.items()})

            logger.info(f"Sequences POST produced {len(rows)} rows, {len(report.violations)} violations")
            return {'success': True, 'verdicts': report.verdict_block(), 'rows': rows}, 200

        except OracleError as e:
            logger.warning(f"Oracle failure in sequences POST: {e}")
            return {'success': False, 'message': str(e)}, 422
        except ValueError as e:
            return {'success': False, 'message': str(e)}, 400
        except Exception as e:
            logger.exception(f"Error in sequences POST: {e}")
            return {'success': False, 'message': 'Server error'}, 500


class VerifyResource(Resource):
    def get(self):
        try:
            count = request.args.get('count', 50, type=int)
            seed = request.args.get('seed', 0, type=int)
            if count <= 0 or count > MAX_VERIFY_COUNT:
                return {'success': False, 'message': f'count must be between 1 and {MAX_VERIFY_COUNT}'}, 400

            logger.info(f"Verify GET - count={count}, seed={seed}")
            suites = verify_all(count, seed)
            return {
                'success': True,
                'suites': [
                    {'name': s.name, 'passed': s.passed, 'total': s.total, 'worst': json_number(s.worst)}
                    for s in suites
                ]
            }, 200

        except Exception as e:
            logger.exception(f"Error in verify GET: {e}")
            return {'success': False, 'message': 'Server error'}, 500
