//! Credential providers for authenticated targets.
//!
//! Secrets are never written in config files; configs name the environment
//! variables that hold them. Token-endpoint traffic is harness traffic and
//! is never written to the execution log.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::clock::SharedClock;

use super::ExecError;

/// How to obtain the `Authorization` header for `authenticate: true` steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuthProvider {
    /// A fixed bearer token, inline or from an environment variable.
    StaticBearer {
        #[serde(skip_serializing_if = "Option::is_none", default)]
        token: Option<String>,
        #[serde(rename = "tokenEnv", skip_serializing_if = "Option::is_none", default)]
        token_env: Option<String>,
    },
    /// OAuth2 client-credentials grant against a token endpoint.
    Oauth2ClientCredentials {
        #[serde(rename = "tokenUrl")]
        token_url: String,
        #[serde(rename = "clientIdEnv")]
        client_id_env: String,
        #[serde(rename = "clientSecretEnv")]
        client_secret_env: String,
    },
    /// OAuth2 refresh-token grant against a token endpoint.
    Oauth2RefreshToken {
        #[serde(rename = "tokenUrl")]
        token_url: String,
        #[serde(rename = "clientIdEnv")]
        client_id_env: String,
        #[serde(rename = "clientSecretEnv")]
        client_secret_env: String,
        #[serde(rename = "refreshTokenEnv")]
        refresh_token_env: String,
    },
}

fn env_secret(name: &str) -> Result<String, ExecError> {
    std::env::var(name)
        .map_err(|_| ExecError::Credential(format!("missing environment variable {name}")))
}

/// Mint a credential header value (`Bearer <token>`) via the provider's flow.
pub fn mint_token(provider: &AuthProvider, agent: &ureq::Agent) -> Result<MintedToken, ExecError> {
    match provider {
        AuthProvider::StaticBearer { token, token_env } => {
            let value = match (token, token_env) {
                (Some(t), _) => t.clone(),
                (None, Some(env)) => env_secret(env)?,
                (None, None) => {
                    return Err(ExecError::Credential(
                        "static_bearer provider has neither 'token' nor 'tokenEnv'".into(),
                    ))
                }
            };
            Ok(MintedToken {
                header_value: format!("Bearer {value}"),
                expires_in_s: None,
            })
        }
        AuthProvider::Oauth2ClientCredentials {
            token_url,
            client_id_env,
            client_secret_env,
        } => {
            let form = [
                ("grant_type", "client_credentials".to_string()),
                ("client_id", env_secret(client_id_env)?),
                ("client_secret", env_secret(client_secret_env)?),
            ];
            token_exchange(agent, token_url, &form)
        }
        AuthProvider::Oauth2RefreshToken {
            token_url,
            client_id_env,
            client_secret_env,
            refresh_token_env,
        } => {
            let form = [
                ("grant_type", "refresh_token".to_string()),
                ("client_id", env_secret(client_id_env)?),
                ("client_secret", env_secret(client_secret_env)?),
                ("refresh_token", env_secret(refresh_token_env)?),
            ];
            token_exchange(agent, token_url, &form)
        }
    }
}

#[derive(Debug, Clone)]
pub struct MintedToken {
    pub header_value: String,
    pub expires_in_s: Option<u64>,
}

fn token_exchange(
    agent: &ureq::Agent,
    token_url: &str,
    form: &[(&str, String)],
) -> Result<MintedToken, ExecError> {
    let body = url::form_urlencoded::Serializer::new(String::new())
        .extend_pairs(form.iter().map(|(k, v)| (*k, v.as_str())))
        .finish();
    let mut response = agent
        .post(token_url)
        .header("Content-Type", "application/x-www-form-urlencoded")
        .send(body.as_bytes())
        .map_err(|e| ExecError::Credential(format!("token endpoint request failed: {e}")))?;
    let status = response.status().as_u16();
    let text = response
        .body_mut()
        .read_to_string()
        .map_err(|e| ExecError::Credential(format!("token endpoint read failed: {e}")))?;
    if !(200..300).contains(&status) {
        return Err(ExecError::Credential(format!(
            "token endpoint rejected the exchange with status {status}"
        )));
    }
    let json: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ExecError::Credential(format!("token endpoint returned invalid JSON: {e}")))?;
    let token = json
        .get("access_token")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ExecError::Credential("token endpoint response has no access_token".into()))?;
    Ok(MintedToken {
        header_value: format!("Bearer {token}"),
        expires_in_s: json.get("expires_in").and_then(|v| v.as_u64()),
    })
}


/// Lazy, cached credential source for one execution run.
pub struct Authenticator {
    provider: Option<AuthProvider>,
    cache: Mutex<Option<CachedToken>>,
}

struct CachedToken {
    header_value: String,
    expires_at_ms: Option<i64>,
}

impl Authenticator {
    pub fn new(provider: Option<AuthProvider>) -> Authenticator {
        Authenticator {
            provider,
            cache: Mutex::new(None),
        }
    }

    /// The `Authorization` value for an authenticated step, minting on first
    /// use and caching until expiry.
    pub fn header_value(
        &self,
        agent: &ureq::Agent,
        clock: &SharedClock,
    ) -> Result<String, ExecError> {
        let provider = self.provider.as_ref().ok_or_else(|| {
            ExecError::Credential("step requires authentication but no auth provider is configured".into())
        })?;
        let now = clock.now_unix_ms();
        let mut cache = self.cache.lock().expect("auth cache poisoned");
        if let Some(cached) = cache.as_ref() {
            let expired = cached.expires_at_ms.is_some_and(|at| now >= at);
            if !expired {
                return Ok(cached.header_value.clone());
            }
        }
        let minted = mint_token(provider, agent)?;
        let entry = CachedToken {
            header_value: minted.header_value.clone(),
            expires_at_ms: minted.expires_in_s.map(|s| now + (s as i64) * 1000),
        };
        *cache = Some(entry);
        Ok(minted.header_value)
    }
}
