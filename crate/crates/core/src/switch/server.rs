use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

use crate::wire::{Frame, HEADER_LEN, Message, ResponseCode, WireError, decode_frame, frame_len};

use super::{Switch, SwitchError, http};

/// Accepts terminal connections until the listener fails.
pub async fn serve_tcp(switch: Arc<Switch>, listener: TcpListener) -> Result<(), SwitchError> {
    loop {
        let (stream, peer) = listener.accept().await?;
        let switch = switch.clone();
        tokio::spawn(async move {
            match serve_connection(switch, stream).await {
                Ok(()) => tracing::debug!(%peer, "terminal disconnected"),
                Err(e) => tracing::warn!(%peer, "closing connection: {e}"),
            }
        });
    }
}

/// One request frame in, one response frame out, until EOF. A frame that
/// fails framing or CRC checks closes the connection: the stream can no
/// longer be trusted to be aligned.
async fn serve_connection(switch: Arc<Switch>, mut stream: TcpStream) -> Result<(), WireError> {
    stream.set_nodelay(true)?;
    loop {
        let mut buf = vec![0u8; HEADER_LEN];
        match stream.read_exact(&mut buf).await {
            Ok(_) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e.into()),
        }
        let total = frame_len(&buf)?;
        buf.resize(total, 0);
        stream.read_exact(&mut buf[HEADER_LEN..]).await?;
        let response = match decode_frame(&buf) {
            Ok((frame, _)) => {
                let switch = switch.clone();
                tokio::task::spawn_blocking(move || switch.handle_frame(&frame))
                    .await
                    .map_err(|e| WireError::Io(e.to_string()))?
            }
            // Intact frame of a type we do not speak.
            Err(WireError::UnknownMessageType(_)) => Message::Err {
                code: ResponseCode::Malformed,
            },
            Err(e) => return Err(e),
        };
        let bytes = response.to_bytes()?;
        stream.write_all(&bytes).await?;
    }
}

/// Periodically ends idle sessions.
pub async fn reap_idle(switch: Arc<Switch>, every: Duration) {
    let mut tick = tokio::time::interval(every);
    loop {
        tick.tick().await;
        let s = switch.clone();
        if let Ok(n) = tokio::task::spawn_blocking(move || s.expire_idle()).await
            && n > 0
        {
            tracing::info!(expired = n, "idle sessions ended");
        }
    }
}

/// Addresses actually bound, which differ from the configured ones when a
/// port of 0 was requested.
#[derive(Debug, Clone, Copy)]
pub struct BoundAddrs {
    pub tcp: SocketAddr,
    pub http: Option<SocketAddr>,
}

/// Binds both listeners, then serves until `shutdown` resolves.
pub async fn run(
    switch: Arc<Switch>,
    shutdown: impl std::future::Future<Output = ()>,
    on_bound: impl FnOnce(BoundAddrs),
) -> Result<(), SwitchError> {
    let config = switch.config().clone();
    let bind = |addr: String| async move {
        TcpListener::bind(&addr)
            .await
            .map_err(|e| SwitchError::Bind {
                addr,
                reason: e.to_string(),
            })
    };
    let tcp = bind(config.listen_addr.clone()).await?;
    let http_listener = match config.http_addr.clone() {
        Some(addr) => Some(bind(addr).await?),
        None => None,
    };
    on_bound(BoundAddrs {
        tcp: tcp.local_addr()?,
        http: http_listener.as_ref().map(|l| l.local_addr()).transpose()?,
    });

    let reap_every = Duration::from_millis((config.session_timeout_ms() / 4).clamp(100, 5_000));
    let mut tasks = tokio::task::JoinSet::new();
    tasks.spawn(serve_tcp(switch.clone(), tcp));
    tasks.spawn({
        let switch = switch.clone();
        async move {
            reap_idle(switch, reap_every).await;
            Ok(())
        }
    });
    if let Some(listener) = http_listener {
        let router = http::router(switch.clone());
        tasks.spawn(async move {
            axum::serve(listener, router)
                .await
                .map_err(SwitchError::from)
        });
    }
    tokio::select! {
        () = shutdown => Ok(()),
        Some(done) = tasks.join_next() => match done {
            Ok(result) => result,
            Err(e) => Err(SwitchError::Io(e.to_string())),
        },
    }
}

/// Decodes a whole request buffer into frames; used by tests that drive
/// the switch without a socket.
pub fn handle_bytes(switch: &Switch, mut bytes: &[u8]) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    while !bytes.is_empty() {
        let (frame, used): (Frame, usize) = decode_frame(bytes)?;
        out.extend(switch.handle_frame(&frame).to_bytes()?);
        bytes = &bytes[used..];
    }
    Ok(out)
}
