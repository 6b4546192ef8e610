from flask import Flask
from flask_restful import Api
from flask_cors import CORS
from routes.entropy_routes import EntropyResource, RelativeEntropyResource, MutualInformationResource
from routes.ree_routes import FreeDistanceResource
from routes.sequence_routes import SequencesResource, VerifyResource
import logging


def create_app(config=None):
    app = Flask(__name__)
    app.config['JSON_SORT_KEYS'] = False
    app.config['MAX_SOLVER_ITERATIONS'] = 500
    if config:
        app.config.update(config)

    CORS(app, origins="*")

    api = Api(app)

    # Single-state functionals
    api.add_resource(EntropyResource, '/api/entropy')
    api.add_resource(RelativeEntropyResource, '/api/relent')
    api.add_resource(MutualInformationResource, '/api/mi')

    # Distances and experiments
    api.add_resource(FreeDistanceResource, '/api/ree')
    api.add_resource(SequencesResource, '/api/sequences')
    api.add_resource(VerifyResource, '/api/verify')

    return app


if __name__ == '__main__':
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    app = create_app()
    print("Starting Flask server...")
    print("Backend will be available at: http://localhost:5000")
    print("\nEndpoints available:")
    print("- POST /api/entropy, /api/relent, /api/mi - entropic functionals of posted states")
    print("- POST /api/ree - distance to a free set with its bracket")
    print("- POST /api/sequences - run an experiment manifest through the continuity harness")
    print("- GET /api/verify?count=N - randomised identity suites")
    app.run(debug=True, host='0.0.0.0', port=5000)
