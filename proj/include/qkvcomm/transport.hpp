#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace qkvcomm {

// Frame = u32 little-endian length prefix + payload bytes. recv_frame
// returns nullopt on a clean end of stream; a connection that dies
// mid-frame raises TransportError ("frame incomplete").
class Transport {
public:
    virtual ~Transport() = default;
    virtual void send_frame(std::span<const uint8_t> payload) = 0;
    virtual std::optional<std::vector<uint8_t>> recv_frame() = 0;
};

// Process-local loopback queue; send and receive may run on different
// threads.
class InMemoryTransport : public Transport {
public:
    void send_frame(std::span<const uint8_t> payload) override;
    std::optional<std::vector<uint8_t>> recv_frame() override;

    size_t pending() const;

private:
    mutable std::mutex mutex_;
    std::deque<std::vector<uint8_t>> frames_;
};

// One connected TCP socket speaking the length-prefixed framing.
class TcpConnection : public Transport {
public:
    explicit TcpConnection(int fd);
    ~TcpConnection() override;

    TcpConnection(const TcpConnection&) = delete;
    TcpConnection& operator=(const TcpConnection&) = delete;

    void send_frame(std::span<const uint8_t> payload) override;
    std::optional<std::vector<uint8_t>> recv_frame() override;

    void close();

private:
    int fd_;
};

// Connects to "host:port". Throws TransportError when unreachable.
std::unique_ptr<TcpConnection> tcp_connect(const std::string& address);

// Listening socket; port 0 binds an ephemeral port.
class TcpListener {
public:
    explicit TcpListener(const std::string& address);
    ~TcpListener();

    TcpListener(const TcpListener&) = delete;
    TcpListener& operator=(const TcpListener&) = delete;

    std::unique_ptr<TcpConnection> accept();
    uint16_t port() const noexcept { return port_; }
    void close();

private:
    int fd_;
    uint16_t port_ = 0;
};

// "host:port" -> (host, port). Throws TransportError on malformed input.
std::pair<std::string, uint16_t> parse_address(const std::string& address);

}  // namespace qkvcomm
