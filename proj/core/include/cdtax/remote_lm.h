/*!
 *  Copyright (c) 2026 by Contributors
 * \file cdtax/remote_lm.h
 * \brief HTTP client for a full-vocabulary logprobs service and an in-process mock server.
 *
 * Wire protocol: `POST /v1/next_logprobs` with
 * `{"vocab_fingerprint":"<hex>","prompt_ids":[...],"generated_ids":[...]}`; the reply is
 * `{"vocab_fingerprint":"<hex>","logprobs":[...]}` with one entry per token, each a number or
 * the string "-inf".
 */
#ifndef CDTAX_REMOTE_LM_H_
#define CDTAX_REMOTE_LM_H_

#include <cdtax/lm.h>

#include <chrono>
#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace cdtax {

inline constexpr const char* kNextLogprobsPath = "/v1/next_logprobs";

class RemoteLM : public LanguageModel {
 public:
  /*! \param endpoint base URL such as `http://127.0.0.1:8080`. */
  RemoteLM(std::string endpoint, std::string vocab_fingerprint, std::size_t vocab_size,
           std::chrono::milliseconds timeout = std::chrono::seconds(30));

  std::size_t vocab_size() const override { return vocab_size_; }
  const std::string& endpoint() const { return endpoint_; }
  /*! \throws BackendError on transport failure, timeout, malformed reply or fingerprint mismatch. */
  NextTokenDistribution Next(const Prefix& prefix) const override;

 private:
  std::string endpoint_;
  std::string fingerprint_;
  std::size_t vocab_size_;
  std::chrono::milliseconds timeout_;
};

/*! \brief Answers the logprobs protocol from any in-process model; used by integration tests. */
class MockLogprobsServer {
 public:
  MockLogprobsServer(std::shared_ptr<const LanguageModel> model, std::string vocab_fingerprint);
  ~MockLogprobsServer();
  MockLogprobsServer(const MockLogprobsServer&) = delete;
  MockLogprobsServer& operator=(const MockLogprobsServer&) = delete;

  /*! \brief Binds host:port (0 picks a free port) and serves on a background thread. */
  int Start(const std::string& host = "127.0.0.1", int port = 0);
  /*! \brief Serves on the calling thread until Stop() is called from elsewhere. */
  void Listen(const std::string& host, int port);
  void Stop();
  int port() const { return port_; }
  std::string url() const;

 private:
  void InstallHandlers();

  std::shared_ptr<const LanguageModel> model_;
  std::string fingerprint_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_ = "127.0.0.1";
  int port_ = 0;
};

}  // namespace cdtax

#endif  // CDTAX_REMOTE_LM_H_
