"""
FL-Linear 本地差分隐私选址求解器 - FastAPI应用入口
实例生成、求解、密度检查的交互式 HTTP 接口
"""

from contextlib import asynccontextmanager

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from loguru import logger

from app.api.routes import solve_routes
from app.core.config import settings
from app.core.exceptions import FacilityLocationError
from app.core.logging import setup_logging


@asynccontextmanager
async def lifespan(app: FastAPI):
    """应用生命周期管理"""
    setup_logging()
    logger.bind(name="app.main").info(f"🚀 {settings.APP_NAME} 启动完成")

    yield

    logger.bind(name="app.main").info(f"🔄 关闭 {settings.APP_NAME}...")


def create_app() -> FastAPI:
    """创建FastAPI应用"""

    app = FastAPI(
        title=settings.APP_NAME,
        description="FL-Linear 设施选址：非隐私最优、拉普拉斯+余量、重连算法",
        version=settings.VERSION,
        lifespan=lifespan,
    )

    @app.exception_handler(FacilityLocationError)
    async def facility_location_error_handler(request: Request, exc: FacilityLocationError):
        log = logger.bind(name="app.main")
        if exc.http_status >= 500:
            log.error(f"❌ 内部错误: {request.url.path}, code={exc.code}, {exc.message}")
        else:
            log.warning(f"⚠️ 请求失败: {request.url.path}, code={exc.code}, {exc.message}")
        return JSONResponse(status_code=exc.http_status, content=exc.to_dict())

    app.include_router(solve_routes.router, prefix="/api", tags=["求解接口"])

    # 健康检查
    @app.get("/health")
    async def health_check():
        return {"status": "healthy", "service": "ldp-facility-location", "version": settings.VERSION}

    return app


# 创建应用实例
app = create_app()

if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "app.main:app",
        host=settings.HOST,
        port=settings.PORT,
        reload=settings.DEBUG,
        log_level="info",
    )
