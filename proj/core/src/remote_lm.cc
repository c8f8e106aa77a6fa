/*!
 *  Copyright (c) 2026 by Contributors
 * \file remote_lm.cc
 */
#include <cdtax/error.h>
#include <cdtax/remote_lm.h>

#include "httplib.h"
#include "json_support.h"

namespace cdtax {

using nlohmann::json;

RemoteLM::RemoteLM(std::string endpoint, std::string vocab_fingerprint, std::size_t vocab_size,
                   std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)),
      fingerprint_(std::move(vocab_fingerprint)),
      vocab_size_(vocab_size),
      timeout_(timeout) {
  while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

NextTokenDistribution RemoteLM::Next(const Prefix& prefix) const {
  json request = {{"vocab_fingerprint", fingerprint_},
                  {"prompt_ids", prefix.prompt_ids},
                  {"generated_ids", prefix.generated_ids}};
  httplib::Client client(endpoint_);
  if (!client.is_valid()) throw BackendError("invalid backend endpoint '" + endpoint_ + "'");
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto response = client.Post(kNextLogprobsPath, request.dump(), "application/json");
  if (!response) {
    throw BackendError("request to " + endpoint_ + " failed: " + httplib::to_string(response.error()));
  }
  json body;
  try {
    body = json::parse(response->body);
  } catch (const json::exception&) {
    throw BackendError("malformed response from " + endpoint_ + " (status " +
                       std::to_string(response->status) + ")");
  }
  if (body.is_object() && body.contains("vocab_fingerprint") && body["vocab_fingerprint"].is_string() &&
      body["vocab_fingerprint"].get<std::string>() != fingerprint_) {
    throw BackendError("vocabulary fingerprint mismatch: expected " + fingerprint_ + ", backend has " +
                       body["vocab_fingerprint"].get<std::string>());
  }
  if (response->status != 200) {
    std::string detail = body.is_object() && body.contains("error") ? body["error"].dump() : response->body;
    throw BackendError("backend returned status " + std::to_string(response->status) + ": " + detail);
  }
  try {
    if (!body.contains("vocab_fingerprint")) throw BackendError("response lacks vocab_fingerprint");
    std::vector<double> logprobs = detail::LogprobsFromJson(body.at("logprobs"));
    if (logprobs.size() != vocab_size_) {
      throw BackendError("response has " + std::to_string(logprobs.size()) + " logprobs, expected " +
                         std::to_string(vocab_size_));
    }
    return NextTokenDistribution(std::move(logprobs));
  } catch (const BackendError&) {
    throw;
  } catch (const std::exception& e) {
    throw BackendError(std::string("malformed response: ") + e.what());
  }
}

MockLogprobsServer::MockLogprobsServer(std::shared_ptr<const LanguageModel> model,
                                       std::string vocab_fingerprint)
    : model_(std::move(model)), fingerprint_(std::move(vocab_fingerprint)),
      server_(std::make_unique<httplib::Server>()) {
  InstallHandlers();
}

MockLogprobsServer::~MockLogprobsServer() { Stop(); }

void MockLogprobsServer::InstallHandlers() {
  server_->Post(kNextLogprobsPath, [this](const httplib::Request& req, httplib::Response& res) {
    auto reply = [&](int status, const json& body) {
      res.status = status;
      res.set_content(body.dump(), "application/json");
    };
    json request;
    try {
      request = json::parse(req.body);
    } catch (const json::exception& e) {
      reply(400, {{"error", std::string("malformed request: ") + e.what()}});
      return;
    }
    try {
      if (request.at("vocab_fingerprint").get<std::string>() != fingerprint_) {
        reply(409, {{"error", "vocabulary fingerprint mismatch"}, {"vocab_fingerprint", fingerprint_}});
        return;
      }
      Prefix prefix{request.at("prompt_ids").get<std::vector<TokenId>>(),
                    request.at("generated_ids").get<std::vector<TokenId>>()};
      NextTokenDistribution dist = model_->Next(prefix);
      reply(200, {{"vocab_fingerprint", fingerprint_}, {"logprobs", detail::LogprobsToJson(dist.logprobs())}});
    } catch (const std::exception& e) {
      reply(400, {{"error", e.what()}});
    }
  });
}

int MockLogprobsServer::Start(const std::string& host, int port) {
  host_ = host;
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else {
    port_ = server_->bind_to_port(host, port) ? port : -1;
  }
  if (port_ < 0) throw BackendError("mock server cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockLogprobsServer::Listen(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) {
    throw BackendError("mock server cannot listen on " + host + ":" + std::to_string(port));
  }
}

void MockLogprobsServer::Stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockLogprobsServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

}  // namespace cdtax
