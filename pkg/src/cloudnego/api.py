"""JSON-over-HTTP front end for :class:`NegotiationService`."""

from __future__ import annotations

import argparse
import logging
from typing import Any, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from . import errors
from .intake import RequirementEnvelope
from .model import Role
from .service import NegotiationService, ServiceConfig, SessionRequest
from .store import AgentStatus, ProductRecord

_STATUS = {
    errors.AgentNotFound: 404,
    errors.ProductNotFound: 404,
    errors.SessionNotFound: 404,
    errors.NoAgentAvailable: 404,
    errors.AlreadyExists: 409,
    errors.AgentBusy: 409,
    errors.InvalidTransition: 409,
    errors.NotConcluded: 409,
    errors.VersionConflict: 409,
    errors.ObjectTooLarge: 413,
    errors.IntegrityError: 422,
    errors.OriginError: 422,
    errors.DecryptionError: 422,
}


def _status_for(exc: errors.NegotiationError) -> int:
    for cls in type(exc).__mro__:
        if cls in _STATUS:
            return _STATUS[cls]
    return 400


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error_code": code, "message": message})


class AgentIn(BaseModel):
    name: str
    experience: int = Field(0, ge=0)
    agent_id: Optional[str] = None


class PrincipalIn(BaseModel):
    public_key: str


class ProductIn(BaseModel):
    product_id: str
    company: str
    price_floor: float
    price_ceiling: float
    features: dict[str, str] = {}


class SessionIn(BaseModel):
    buyer_envelope: dict[str, Any]
    seller_envelope: dict[str, Any]
    buyer_agent_id: str
    seller_agent_id: str
    product_id: Optional[str] = None
    first_mover: Role = Role.BUYER


def create_app(service: NegotiationService) -> FastAPI:
    app = FastAPI(title="cloudnego")

    @app.exception_handler(errors.NegotiationError)
    async def _domain_error(request: Request, exc: errors.NegotiationError):
        return _error(_status_for(exc), exc.code, str(exc))

    @app.exception_handler(RequestValidationError)
    async def _validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_request", str(exc.errors()))

    @app.exception_handler(ValueError)
    async def _value_error(request: Request, exc: ValueError):
        return _error(400, "invalid_request", str(exc))

    @app.post("/agents", status_code=201)
    def register_agent(body: AgentIn):
        return service.register_agent(body.name, body.experience, body.agent_id).to_dict()

    @app.get("/agents")
    def select_agent(min_experience: int = 0, status: AgentStatus = AgentStatus.AVAILABLE):
        return service.select_agent(min_experience, status).to_dict()

    @app.post("/principals", status_code=201)
    def register_principal(body: PrincipalIn):
        return {"key_id": service.register_principal(body.public_key.encode("ascii"))}

    @app.post("/products", status_code=201)
    def add_product(body: ProductIn):
        record = ProductRecord(**body.model_dump())
        service.add_product(record)
        return record.to_dict()

    @app.get("/products/{product_id}")
    def get_product(product_id: str):
        return service.get_product(product_id).to_dict()

    @app.post("/sessions", status_code=201)
    def submit(body: SessionIn):
        request = SessionRequest(
            buyer_envelope=RequirementEnvelope.from_dict(body.buyer_envelope),
            seller_envelope=RequirementEnvelope.from_dict(body.seller_envelope),
            buyer_agent_id=body.buyer_agent_id,
            seller_agent_id=body.seller_agent_id,
            product_id=body.product_id,
            first_mover=body.first_mover,
        )
        return {"session_id": service.submit_requirements(request)}

    @app.post("/sessions/{session_id}/start")
    def start(session_id: str):
        return service.start_session(session_id).to_dict()

    @app.get("/sessions/{session_id}")
    def status(session_id: str):
        return {"session_id": session_id, "state": service.get_status(session_id).value}

    @app.get("/sessions/{session_id}/feedback")
    def feedback(session_id: str, recipient: Role):
        return service.get_feedback(session_id, recipient).to_dict()

    @app.get("/sessions/{session_id}/transcript", response_class=PlainTextResponse)
    def transcript(session_id: str):
        return service.get_transcript(session_id)

    return app


def main(argv: list[str] | None = None) -> None:
    import uvicorn

    parser = argparse.ArgumentParser(prog="cloudnego-serve", description="Run the negotiation HTTP service.")
    parser.add_argument("--config", help="JSON config file")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO)
    config = ServiceConfig.load(args.config) if args.config else ServiceConfig()
    host, port = config.host_port
    uvicorn.run(create_app(NegotiationService.from_config(config)), host=host, port=port)
