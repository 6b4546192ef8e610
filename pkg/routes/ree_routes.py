from flask import current_app, request
from flask_restful import Resource
from core.errors import OracleError
from core.solver import free_distance
from database.manifests import parse_free_set, solver_config
from routes.entropy_routes import json_number, state_from_body
import logging

logger = logging.getLogger(__name__)


class FreeDistanceResource(Resource):
    def post(self):
        try:
            data = request.get_json(silent=True)
            if not data:
                return {'success': False, 'message': 'No data provided'}, 400

            descriptor = data.get('free_set')
            if not descriptor:
                return {'success': False, 'message': 'Free set descriptor required'}, 400
            if descriptor.startswith('hull:'):
                return {'success': False, 'message': 'Hull descriptors are only available from the command line'}, 400

            rho = state_from_body(data, 'state')
            max_iter = int(data.get('max_iter', current_app.config['MAX_SOLVER_ITERATIONS']))
            if max_iter <= 0 or max_iter > current_app.config['MAX_SOLVER_ITERATIONS']:
                return {'success': False, 'message': f"max_iter must be between 1 and {current_app.config['MAX_SOLVER_ITERATIONS']}"}, 400
            seed = int(data.get('seed', 0))

            logger.info(f"Free distance POST - layout {rho.layout}, free_set={descriptor}, max_iter={max_iter}")
            model = parse_free_set(descriptor, rho.layout)
            result = free_distance(rho, model, solver_config({'max_iter': max_iter}, seed))

            return {
                'success': True,
                'lower': json_number(result.lower),
                'upper': json_number(result.upper),
                'iterations': result.iterations,
                'fw_gap': json_number(result.fw_gap),
                'certified': result.certified,
                'diagnostics': result.diagnostics
            }, 200

        except OracleError as e:
            logger.warning(f"Oracle failure in free distance POST: {e}")
            response = {'success': False, 'message': str(e)}
            if e.bracket is not None:
                response['bracket'] = [json_number(x) for x in e.bracket]
            return response, 422
        except ValueError as e:
            return {'success': False, 'message': str(e)}, 400
        except Exception as e:
            logger.exception(f"Error in free distance POST: {e}")
            return {'success': False, 'message': 'Server error'}, 500
