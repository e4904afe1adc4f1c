# Pydantic模型包