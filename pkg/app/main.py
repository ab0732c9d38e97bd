from fastapi import FastAPI

from app.api.routes import api_router
from app.config import settings

app = FastAPI(
    title=settings.app_name,
    description="Deterministic TSCH mesh simulator with an SDN control plane and Layer-2 track slices.",
)
app.include_router(api_router, prefix="/api/v1")


@app.get("/health")
def health():
    return {"status": "ok"}
