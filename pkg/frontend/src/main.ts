import { ApiClient, resolveApiBase } from './api.js';
import { ChatApp } from './app.js';

const root = document.getElementById('app');
if (root) {
  const app = new ChatApp(new ApiClient(resolveApiBase()), root);
  app.mount();
}
