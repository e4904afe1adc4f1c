# API路由包