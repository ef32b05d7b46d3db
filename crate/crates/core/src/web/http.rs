//! HTTP exposure of a [`WebOfLinkedData`] and the matching client.
//!
//! `GET /lookup?uri=<percent-encoded URI>` answers 200 with an N-Triples
//! body, 404 for unknown URIs and 400 for a missing or undecodable `uri`
//! parameter.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use percent_encoding::{percent_decode_str, utf8_percent_encode, NON_ALPHANUMERIC};

use super::{Document, FetchError, Lookup, WebAccess, WebError, WebOfLinkedData};
use crate::rdf::{parse_ntriples, serialize_ntriples, Term};

pub const CONTENT_TYPE: &str = "application/n-triples";

#[derive(Debug, Clone, Copy)]
pub struct ServeOptions {
    /// Sleep for the latency model's delay before answering.
    pub apply_latency: bool,
}

impl Default for ServeOptions {
    fn default() -> Self {
        Self {
            apply_latency: true,
        }
    }
}

/// A running server. Dropping the handle stops it.
pub struct ServerHandle {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to hand to [`HttpWeb::new`], e.g. `http://127.0.0.1:8080`.
    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops, which only happens via [`shutdown`](Self::shutdown)
    /// from another handle or process termination.
    pub fn join(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Starts serving `web` on `127.0.0.1:port` (port 0 picks a free port).
pub fn serve_http(
    web: Arc<WebOfLinkedData>,
    port: u16,
    opts: ServeOptions,
) -> Result<ServerHandle, WebError> {
    serve_http_on(web, &format!("127.0.0.1:{port}"), opts)
}

/// Like [`serve_http`] with an explicit bind address.
pub fn serve_http_on(
    web: Arc<WebOfLinkedData>,
    bind: &str,
    opts: ServeOptions,
) -> Result<ServerHandle, WebError> {
    let port = bind
        .rsplit_once(':')
        .and_then(|(_, p)| p.parse().ok())
        .unwrap_or(0);
    let server = tiny_http::Server::http(bind).map_err(|e| WebError::Bind {
        port,
        message: e.to_string(),
    })?;
    let addr = server
        .server_addr()
        .to_ip()
        .ok_or_else(|| WebError::Bind {
            port,
            message: "not an IP listener".into(),
        })?;
    let server = Arc::new(server);
    let srv = Arc::clone(&server);
    let thread = std::thread::Builder::new()
        .name("lookup-server".into())
        .spawn(move || {
            for request in srv.incoming_requests() {
                let web = Arc::clone(&web);
                // One thread per request so simulated delays overlap the way
                // concurrent lookups on a real server would.
                std::thread::spawn(move || respond(&web, request, opts));
            }
        })
        .map_err(|e| WebError::Bind {
            port,
            message: e.to_string(),
        })?;
    Ok(ServerHandle {
        server,
        addr,
        thread: Some(thread),
    })
}

enum Answer {
    Found(String),
    NotFound,
    BadRequest(&'static str),
    WrongMethod,
}

fn answer(web: &WebOfLinkedData, method: &tiny_http::Method, url: &str) -> (Answer, Option<Term>) {
    if *method != tiny_http::Method::Get {
        return (Answer::WrongMethod, None);
    }
    let (path, query) = url.split_once('?').unwrap_or((url, ""));
    if path != "/lookup" {
        return (Answer::NotFound, None);
    }
    let Some(raw) = query
        .split('&')
        .find_map(|kv| kv.strip_prefix("uri="))
    else {
        return (Answer::BadRequest("missing uri parameter"), None);
    };
    let Some(decoded) = strict_percent_decode(raw) else {
        return (Answer::BadRequest("malformed percent-encoding"), None);
    };
    let Ok(uri) = Term::parse_uri(&decoded) else {
        return (Answer::BadRequest("not a URI"), None);
    };
    match web.get(&uri) {
        Some(doc) => (Answer::Found(serialize_ntriples(doc.triples())), Some(uri)),
        None => (Answer::NotFound, Some(uri)),
    }
}

fn respond(web: &WebOfLinkedData, request: tiny_http::Request, opts: ServeOptions) {
    let (ans, uri) = answer(web, request.method(), request.url());
    if opts.apply_latency {
        if let Some(uri) = &uri {
            let ms = web.latency().delay_ms(uri.lexical());
            std::thread::sleep(Duration::from_millis(ms));
        }
    }
    let response = match ans {
        Answer::Found(body) => {
            let header = tiny_http::Header::from_bytes("Content-Type", CONTENT_TYPE)
                .expect("static header");
            tiny_http::Response::from_string(body).with_header(header)
        }
        Answer::NotFound => tiny_http::Response::from_string("not found\n").with_status_code(404),
        Answer::BadRequest(msg) => {
            tiny_http::Response::from_string(format!("{msg}\n")).with_status_code(400)
        }
        Answer::WrongMethod => {
            tiny_http::Response::from_string("method not allowed\n").with_status_code(405)
        }
    };
    if let Err(e) = request.respond(response) {
        log::debug!("client went away: {e}");
    }
}

/// Percent-decodes, rejecting `%` not followed by two hex digits and
/// results that are not UTF-8.
fn strict_percent_decode(s: &str) -> Option<String> {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i] == b'%' {
            if i + 2 >= b.len() || !(b[i + 1].is_ascii_hexdigit() && b[i + 2].is_ascii_hexdigit())
            {
                return None;
            }
            i += 3;
        } else {
            i += 1;
        }
    }
    percent_decode_str(s).decode_utf8().ok().map(|c| c.into_owned())
}

/// Client for the lookup endpoint.
pub struct HttpWeb {
    endpoint: String,
    agent: ureq::Agent,
}

impl HttpWeb {
    pub fn new(endpoint: impl Into<String>) -> Self {
        let endpoint = endpoint.into().trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new()
            .timeout_connect(Duration::from_secs(10))
            .timeout(Duration::from_secs(120))
            .build();
        Self { endpoint, agent }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn fetch(&self, uri: &Term) -> Result<Option<Document>, FetchError> {
        let target = format!(
            "{}/lookup?uri={}",
            self.endpoint,
            utf8_percent_encode(uri.lexical(), NON_ALPHANUMERIC)
        );
        match self.agent.get(&target).call() {
            Ok(resp) => {
                let body = resp
                    .into_string()
                    .map_err(|e| FetchError::Transport(e.to_string()))?;
                let triples = parse_ntriples(&body).map_err(|e| FetchError::Body(e.to_string()))?;
                Ok(Some(Document::new(uri.clone(), triples)))
            }
            Err(ureq::Error::Status(404, _)) => Ok(None),
            Err(ureq::Error::Status(code, _)) => Err(FetchError::Status(code)),
            Err(e) => Err(FetchError::Transport(e.to_string())),
        }
    }
}

impl WebAccess for HttpWeb {
    fn lookup(&self, uri: &Term) -> Lookup {
        let started = Instant::now();
        let outcome = self.fetch(uri).map(|d| d.map(Arc::new));
        Lookup {
            outcome,
            delay_us: started.elapsed().as_micros() as u64,
            simulated: false,
        }
    }
}

/// One-shot lookup against an endpoint.
pub fn http_fetch(endpoint: &str, uri: &Term) -> Result<Option<Document>, FetchError> {
    HttpWeb::new(endpoint).fetch(uri)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_decoding() {
        assert_eq!(strict_percent_decode("http%3A%2F%2Fa").as_deref(), Some("http://a"));
        assert_eq!(strict_percent_decode("plain").as_deref(), Some("plain"));
        assert_eq!(strict_percent_decode("bad%zz"), None);
        assert_eq!(strict_percent_decode("trail%4"), None);
        assert_eq!(strict_percent_decode("trail%"), None);
        assert_eq!(strict_percent_decode("%FF%FE"), None);
    }

    #[test]
    fn routing_without_network() {
        let mut web = WebOfLinkedData::new(super::super::LatencyModel::zero());
        web.insert(Document::new(Term::uri("http://a/x"), Default::default()));
        let get = tiny_http::Method::Get;
        assert!(matches!(
            answer(&web, &get, "/lookup?uri=http%3A%2F%2Fa%2Fx").0,
            Answer::Found(_)
        ));
        assert!(matches!(
            answer(&web, &get, "/lookup?uri=http%3A%2F%2Fa%2Fy").0,
            Answer::NotFound
        ));
        assert!(matches!(answer(&web, &get, "/lookup?uri=%G1").0, Answer::BadRequest(_)));
        assert!(matches!(answer(&web, &get, "/lookup").0, Answer::BadRequest(_)));
        assert!(matches!(answer(&web, &get, "/other").0, Answer::NotFound));
        assert!(matches!(
            answer(&web, &tiny_http::Method::Post, "/lookup?uri=x").0,
            Answer::WrongMethod
        ));
    }
}
