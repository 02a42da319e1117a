import { afterEach, describe, expect, it, vi } from 'vitest';

import { ServiceClient, ServiceError } from '../src/api.js';

function jsonResponse(status: number, body: unknown): Response {
    return new Response(JSON.stringify(body), {
        status,
        headers: { 'Content-Type': 'application/json' },
    });
}

afterEach(() => {
    vi.unstubAllGlobals();
});

describe('ServiceClient', () => {
    it('posts queries with a JSON body and returns the payload', async () => {
        const fetchMock = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
            expect(String(url)).toBe('http://x/v1/sessions/s1/queries');
            expect(init?.method).toBe('POST');
            expect(JSON.parse(String(init?.body))).toEqual({ text: 'kill thread' });
            return jsonResponse(200, { query_id: 'q1', items: [] });
        });
        vi.stubGlobal('fetch', fetchMock);
        const client = new ServiceClient('http://x');
        const result = await client.postQuery('s1', 'kill thread');
        expect(result.query_id).toBe('q1');
        expect(fetchMock).toHaveBeenCalledTimes(1);
    });

    it('maps service errors onto ServiceError with code and status', async () => {
        vi.stubGlobal(
            'fetch',
            vi.fn(async () => jsonResponse(422, { code: 'empty_text', message: 'nope' })),
        );
        const client = new ServiceClient('http://x');
        const error = await client.postQuery('s1', ' ').catch((e) => e);
        expect(error).toBeInstanceOf(ServiceError);
        expect(error.status).toBe(422);
        expect(error.code).toBe('empty_text');
        expect(error.message).toBe('nope');
    });

    it('treats 204 feedback responses as void', async () => {
        vi.stubGlobal('fetch', vi.fn(async () => new Response(null, { status: 204 })));
        const client = new ServiceClient('http://x');
        await expect(client.postFeedback('s1', 'q1', 'api.a')).resolves.toBeUndefined();
    });

    it('closes sessions with DELETE', async () => {
        const fetchMock = vi.fn(async (url: RequestInfo | URL, init?: RequestInit) => {
            expect(init?.method).toBe('DELETE');
            expect(String(url)).toBe('http://x/v1/sessions/s9');
            return jsonResponse(202, { model_version: 3, retraining: true });
        });
        vi.stubGlobal('fetch', fetchMock);
        const client = new ServiceClient('http://x');
        const result = await client.closeSession('s9');
        expect(result.model_version).toBe(3);
    });

    it('survives non-JSON error bodies', async () => {
        vi.stubGlobal('fetch', vi.fn(async () => new Response('boom', { status: 500 })));
        const client = new ServiceClient('http://x');
        const error = await client.createSession().catch((e) => e);
        expect(error).toBeInstanceOf(ServiceError);
        expect(error.code).toBe('http_error');
    });
});
