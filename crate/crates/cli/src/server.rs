use axum::body::Bytes;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::json;
use tokio::net::TcpListener;
use tqkd::pipeline::{handle_rates_request, RatesRequest};

pub fn router() -> Router {
    Router::new().route("/v1/rates", post(rates))
}

pub async fn serve(listener: TcpListener) -> anyhow::Result<()> {
    axum::serve(listener, router()).await?;
    Ok(())
}

fn error(status: StatusCode, message: String, fields: Vec<&str>) -> Response {
    (status, Json(json!({ "error": message, "fields": fields }))).into_response()
}

/// 400 for a malformed body, 422 for invalid parameters (with the offending
/// fields), otherwise 200 with one entry per point.
async fn rates(body: Bytes) -> Response {
    let req: RatesRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.to_string(), vec![]),
    };
    if let Err(v) = req.params.clone().validate() {
        let fields = v.fields().collect();
        return error(StatusCode::UNPROCESSABLE_ENTITY, v.to_string(), fields);
    }
    match tokio::task::spawn_blocking(move || handle_rates_request(&req)).await {
        Ok(Ok(points)) => Json(points).into_response(),
        Ok(Err(e)) => error(
            StatusCode::UNPROCESSABLE_ENTITY,
            e.to_string(),
            vec!["sweep"],
        ),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), vec![]),
    }
}
